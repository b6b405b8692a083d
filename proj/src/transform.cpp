#include "loadbench/transform.hpp"

#include <algorithm>
#include <cmath>

#include "loadbench/error.hpp"
#include "loadbench/kvconfig.hpp"
#include "loadbench/text.hpp"

namespace loadbench::transform {

namespace {

constexpr double kShiftEpsilon = 1e-3;

double forward_shifted(double s, double lambda) {
  return lambda == 0.0 ? std::log(s) : std::expm1(lambda * std::log(s)) / lambda;
}

}  // namespace

double boxcox_log_likelihood(std::span<const double> shifted, double lambda) {
  const double n = static_cast<double>(shifted.size());
  double mean = 0.0, log_sum = 0.0;
  for (double s : shifted) {
    mean += forward_shifted(s, lambda);
    log_sum += std::log(s);
  }
  mean /= n;
  double var = 0.0;
  for (double s : shifted) {
    const double d = forward_shifted(s, lambda) - mean;
    var += d * d;
  }
  var /= n;
  return -0.5 * n * std::log(var) + (lambda - 1.0) * log_sum;
}

BoxCoxParams boxcox_fit(std::span<const double> samples) {
  if (samples.size() < 2) fail(ErrorKind::Data, "Box-Cox fit needs at least 2 samples");
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  if (!(*lo < *hi)) fail(ErrorKind::Data, "Box-Cox fit needs at least 2 distinct samples");
  for (double v : samples) {
    if (!std::isfinite(v)) fail(ErrorKind::Data, "Box-Cox fit on non-finite sample");
  }

  BoxCoxParams p;
  p.shift = std::max(0.0, kShiftEpsilon - *lo);
  std::vector<double> shifted(samples.begin(), samples.end());
  for (double& v : shifted) v += p.shift;

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = -2.0, b = 2.0;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = boxcox_log_likelihood(shifted, c), fd = boxcox_log_likelihood(shifted, d);
  while (b - a > 1e-4) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = boxcox_log_likelihood(shifted, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = boxcox_log_likelihood(shifted, d);
    }
  }
  p.lambda = 0.5 * (a + b);
  return p;
}

double boxcox_forward(double x, const BoxCoxParams& p) {
  const double s = x + p.shift;
  if (!(s > 0.0)) {
    fail(ErrorKind::Domain, "Box-Cox argument x + shift = " + text::format_double(s) + " is not positive");
  }
  return forward_shifted(s, p.lambda);
}

double boxcox_inverse(double y, const BoxCoxParams& p) {
  if (p.lambda == 0.0) return std::exp(y) - p.shift;
  const double t = p.lambda * y;
  if (!(t > -1.0)) {
    fail(ErrorKind::Domain, "Box-Cox inverse undefined for y = " + text::format_double(y) +
                                " at lambda = " + text::format_double(p.lambda));
  }
  return std::exp(std::log1p(t) / p.lambda) - p.shift;
}

BackProjected backproject_gaussian(double mu, double sigma, const BoxCoxParams& p) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    fail(ErrorKind::Domain, "scaled sigma must be finite and >= 0");
  }
  BackProjected out;
  out.mu = boxcox_inverse(mu, p);
  const auto in_domain = [&](double y) { return p.lambda == 0.0 || p.lambda * y > -1.0; };

  double lower;
  if (in_domain(mu - sigma)) {
    lower = out.mu - boxcox_inverse(mu - sigma, p);
  } else {
    // Inverse maps the domain boundary to x + shift = 0.
    lower = out.mu + p.shift;
    out.low_confidence = true;
  }
  double upper;
  if (in_domain(mu + sigma)) {
    upper = boxcox_inverse(mu + sigma, p) - out.mu;
  } else {
    // lambda < 0: the inverse diverges before mu + sigma; mirror the lower side.
    upper = lower;
    out.low_confidence = true;
  }
  out.sigma = 0.5 * (upper + lower);
  return out;
}

StandardScalerParams standard_fit(std::span<const double> samples) {
  if (samples.empty()) fail(ErrorKind::Data, "standard scaler fit on empty samples");
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(samples.size());
  double var = 0.0;
  for (double v : samples) var += (v - mean) * (v - mean);
  var /= static_cast<double>(samples.size());
  if (!(var > 0.0)) fail(ErrorKind::Data, "standard scaler fit on constant samples");
  return {mean, std::sqrt(var)};
}

std::string serialize(const BoxCoxParams& p) {
  return "kind=boxcox\nlambda=" + text::format_double(p.lambda) +
         "\nshift=" + text::format_double(p.shift) + "\n";
}

std::string serialize(const StandardScalerParams& p) {
  return "kind=standard\nmean=" + text::format_double(p.mean) +
         "\nstd=" + text::format_double(p.std) + "\n";
}

BoxCoxParams parse_boxcox(const std::string& content) {
  const auto kv = KvConfig::parse(content);
  if (kv.get_or("kind", "") != "boxcox") fail(ErrorKind::Data, "not a Box-Cox parameter file");
  BoxCoxParams p;
  p.lambda = text::parse_double(kv.require("lambda"));
  p.shift = text::parse_double(kv.require("shift"));
  if (!std::isfinite(p.lambda) || !(p.shift >= 0.0)) fail(ErrorKind::Data, "bad Box-Cox parameters");
  return p;
}

StandardScalerParams parse_standard(const std::string& content) {
  const auto kv = KvConfig::parse(content);
  if (kv.get_or("kind", "") != "standard") fail(ErrorKind::Data, "not a standard-scaler parameter file");
  StandardScalerParams p;
  p.mean = text::parse_double(kv.require("mean"));
  p.std = text::parse_double(kv.require("std"));
  if (!(p.std > 0.0)) fail(ErrorKind::Data, "standard scaler std must be > 0");
  return p;
}

}  // namespace loadbench::transform
