#pragma once

// Forecaster interface, persistence baselines, the direct linear and DLinear
// regressors, early-stopping training and prediction-file scoring.

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "loadbench/core.hpp"
#include "loadbench/metrics.hpp"
#include "loadbench/store.hpp"
#include "loadbench/transform.hpp"

namespace loadbench::forecast {

using metrics::ForecastDistribution;
using metrics::HourArray;

class Forecaster {
 public:
  virtual ~Forecaster() = default;
  virtual std::string name() const = 0;
  virtual bool needs_fit() const { return false; }
  /// `val` may be empty; trainable models then hold out the tail of `train`.
  virtual void fit(std::span<const Window> train, std::span<const Window> val) {
    (void)train;
    (void)val;
  }
  virtual ForecastDistribution predict(const Window& window) const = 0;
};

/// Last 24 context hours.
metrics::PointForecast previous_day(std::span<const double> context);
/// First 24 context hours (same weekday one week earlier).
metrics::PointForecast previous_week(std::span<const double> context);
/// For horizon hour i, mean and population standard deviation of the seven
/// context values 24, 48, ..., 168 hours before it.
metrics::GaussianForecast persistence_ensemble(std::span<const double> context);

class PreviousDay final : public Forecaster {
 public:
  std::string name() const override { return "previous_day"; }
  ForecastDistribution predict(const Window& w) const override {
    return previous_day(w.context.values());
  }
};

class PreviousWeek final : public Forecaster {
 public:
  std::string name() const override { return "previous_week"; }
  ForecastDistribution predict(const Window& w) const override {
    return previous_week(w.context.values());
  }
};

class PersistenceEnsemble final : public Forecaster {
 public:
  std::string name() const override { return "persistence_ensemble"; }
  ForecastDistribution predict(const Window& w) const override {
    return persistence_ensemble(w.context.values());
  }
};

struct TrainSchedule {
  std::size_t max_epochs = 100;
  std::size_t patience = 2;
  std::vector<double> lr_grid{1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  std::uint64_t seed = 0;
  /// Full-batch gradient steps per epoch.
  std::size_t steps_per_epoch = 20;

  void validate() const;
};

// ---------------------------------------------------------------------------
// Direct linear regression: 24 outputs as weighted sums of 168 inputs (kWh).

inline constexpr double kRidge = 1e-8;

struct LinearDirectModel {
  Eigen::MatrixXd weights = Eigen::MatrixXd::Zero(kHorizonHours, kContextHours);
  Eigen::VectorXd bias = Eigen::VectorXd::Zero(kHorizonHours);
  bool use_bias = true;

  HourArray predict(std::span<const double> context) const;
};

/// Least squares per output hour on centred data (when use_bias) with ridge
/// damping kRidge on the weights; the bias absorbs the means, so constant
/// training data yields a bias-only model.
LinearDirectModel fit_linear_direct(std::span<const Window> windows, bool use_bias = true);

struct LinearGradient {
  double loss = 0.0;
  Eigen::MatrixXd d_weights;
  Eigen::VectorXd d_bias;
};

/// Mean squared error over all windows and horizon hours, and its gradient.
double linear_mse(const LinearDirectModel& model, std::span<const Window> windows);
LinearGradient linear_mse_gradient(const LinearDirectModel& model, std::span<const Window> windows);

// ---------------------------------------------------------------------------
// DLinear: moving-average trend + residual, one linear head for each.

struct DLinearModel {
  std::size_t kernel_size = 25;
  Eigen::MatrixXd trend_weights;
  Eigen::MatrixXd residual_weights;
  Eigen::VectorXd trend_bias;
  Eigen::VectorXd residual_bias;
  bool use_bias = true;
  /// Inputs and targets are standard scaled with statistics of the training windows.
  transform::StandardScalerParams scaler{};

  /// Weights initialised to the context average, biases to zero.
  static DLinearModel initial(std::size_t kernel_size, bool use_bias = true);
  HourArray predict(std::span<const double> context) const;
};

/// Centred moving average with edge-replication padding; residual = x - trend.
void decompose(std::span<const double> x, std::size_t kernel_size, std::vector<double>& trend,
               std::vector<double>& residual);

struct DLinearGradient {
  double loss = 0.0;
  Eigen::MatrixXd d_trend_weights, d_residual_weights;
  Eigen::VectorXd d_trend_bias, d_residual_bias;
};

/// Loss is the MSE in the model's scaled space.
double dlinear_mse(const DLinearModel& model, std::span<const Window> windows);
DLinearGradient dlinear_mse_gradient(const DLinearModel& model, std::span<const Window> windows);

struct TrainHistory {
  std::vector<double> val_loss;  // one entry per epoch run
  std::size_t best_epoch = 0;    // 1-based
  bool stopped_early = false;
  double learning_rate = 0.0;
  double best_val_loss = std::numeric_limits<double>::infinity();
};

template <class Model>
struct TrainResult {
  Model model;
  TrainHistory history;
};

/// Runs `epoch(model)` until the validation loss has not improved for
/// `patience` consecutive epochs or `max_epochs` is reached, and returns the
/// snapshot with the best validation loss.
template <class Model, class EpochFn, class LossFn>
TrainResult<Model> train_with_early_stopping(Model model, EpochFn&& epoch, LossFn&& val_loss,
                                             std::size_t max_epochs, std::size_t patience) {
  TrainResult<Model> out{model, {}};
  std::size_t since_best = 0;
  for (std::size_t e = 1; e <= max_epochs; ++e) {
    epoch(model);
    const double loss = val_loss(static_cast<const Model&>(model));
    out.history.val_loss.push_back(loss);
    if (loss < out.history.best_val_loss) {
      out.history.best_val_loss = loss;
      out.history.best_epoch = e;
      out.model = model;
      since_best = 0;
    } else if (++since_best >= patience) {
      out.history.stopped_early = e < max_epochs;
      break;
    }
  }
  return out;
}

/// Full-batch gradient descent for each learning rate of the grid with early
/// stopping; keeps the rate with the lowest best validation loss.
TrainResult<DLinearModel> fit_dlinear(std::span<const Window> train, std::span<const Window> val,
                                      const TrainSchedule& schedule, std::size_t kernel_size = 25,
                                      bool use_bias = true);

class LinearDirect final : public Forecaster {
 public:
  explicit LinearDirect(bool use_bias = true) : use_bias_(use_bias) {}
  std::string name() const override { return "linear"; }
  bool needs_fit() const override { return true; }
  void fit(std::span<const Window> train, std::span<const Window> val) override;
  ForecastDistribution predict(const Window& w) const override;
  const LinearDirectModel& model() const { return model_; }

 private:
  bool use_bias_;
  LinearDirectModel model_;
};

class DLinear final : public Forecaster {
 public:
  DLinear(TrainSchedule schedule, std::size_t kernel_size = 25, bool use_bias = true)
      : schedule_(std::move(schedule)), kernel_size_(kernel_size), use_bias_(use_bias) {}
  std::string name() const override { return "dlinear"; }
  bool needs_fit() const override { return true; }
  void fit(std::span<const Window> train, std::span<const Window> val) override;
  ForecastDistribution predict(const Window& w) const override;
  const TrainHistory& history() const { return history_; }

 private:
  TrainSchedule schedule_;
  std::size_t kernel_size_;
  bool use_bias_;
  DLinearModel model_;
  TrainHistory history_;
};

// ---------------------------------------------------------------------------
// Prediction interchange file:
//   building,day_index,hour,kind,p1,p2,...
// day_index counts days from the start of the building's series in the
// actuals corpus; kind is point (p1 = value), gaussian (p1 = mu, p2 = sigma)
// or categorical (p1.. = sparse `token:mass` pairs over the vocabulary).

struct PredictionFileResult {
  std::vector<metrics::BuildingScore> scores;  // sorted by building id
  std::size_t rows_total = 0;
  std::size_t rows_rejected = 0;
  std::size_t days_rejected = 0;  // incomplete or mixed-kind days
  std::vector<std::string> rejections;  // first messages, for the summary
  std::vector<std::string> undefined;   // buildings with zero mean actual load
  std::vector<std::string> incomplete;  // buildings with rows but no complete day
};

PredictionFileResult score_prediction_file(const std::string& path, const store::Corpus& actuals,
                                           const metrics::ScoringContext& ctx);

}  // namespace loadbench::forecast
