#pragma once

#include <stdexcept>
#include <string>

namespace dphase {

class InvalidArgument : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// The Nehari fibering function t -> <phi'(t u), t u> has no positive root
/// along the given direction.
class NotProjectable : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// lambda does not exceed the discrete threshold beta * lambda_1(q).
class InfeasibleLambda : public std::domain_error {
public:
  InfeasibleLambda(const std::string& what, double threshold)
      : std::domain_error(what), threshold_(threshold) {}
  double threshold() const noexcept { return threshold_; }

private:
  double threshold_;
};

class NonConvergence : public std::runtime_error {
public:
  NonConvergence(const std::string& what, int iterations, double residual)
      : std::runtime_error(what), iterations_(iterations), residual_(residual) {}
  int iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

private:
  int iterations_;
  double residual_;
};

}  // namespace dphase
