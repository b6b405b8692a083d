#pragma once

// Value-space normalizations: Box-Cox with a fitted lambda, its Gaussian
// back-projection, and standard scaling.

#include <span>
#include <string>

namespace loadbench::transform {

struct BoxCoxParams {
  double lambda = 1.0;
  double shift = 0.0;  // kWh added before transforming
};

/// shift = max(0, 1e-3 - min); lambda maximises the normal profile
/// log-likelihood by golden-section search on [-2, 2] (tolerance 1e-4).
BoxCoxParams boxcox_fit(std::span<const double> samples);

/// Profile log-likelihood of lambda for already shifted, positive samples.
double boxcox_log_likelihood(std::span<const double> shifted, double lambda);

double boxcox_forward(double x, const BoxCoxParams& p);
double boxcox_inverse(double y, const BoxCoxParams& p);

struct BackProjected {
  double mu = 0.0;     // kWh
  double sigma = 0.0;  // kWh
  /// mu - sigma (or mu + sigma) left the inverse's domain and was clamped.
  bool low_confidence = false;
};

/// Gaussian in kWh approximating the inverse transform of N(mu, sigma^2):
/// mean f^-1(mu), standard deviation the average of the upper and lower
/// one-sigma distances.
BackProjected backproject_gaussian(double mu_scaled, double sigma_scaled, const BoxCoxParams& p);

struct StandardScalerParams {
  double mean = 0.0;
  double std = 1.0;  // population standard deviation
};

StandardScalerParams standard_fit(std::span<const double> samples);
inline double standard_forward(double x, const StandardScalerParams& p) {
  return (x - p.mean) / p.std;
}
inline double standard_inverse(double z, const StandardScalerParams& p) {
  return z * p.std + p.mean;
}

/// Key-value text (`kind=boxcox`, `lambda=...`, `shift=...`).
std::string serialize(const BoxCoxParams& p);
std::string serialize(const StandardScalerParams& p);
BoxCoxParams parse_boxcox(const std::string& text);
StandardScalerParams parse_standard(const std::string& text);

}  // namespace loadbench::transform
