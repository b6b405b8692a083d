#include "loadbench/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "loadbench/error.hpp"
#include "loadbench/text.hpp"

namespace loadbench::forecast {

metrics::PointForecast previous_day(std::span<const double> context) {
  if (context.size() != kContextHours) fail(ErrorKind::Usage, "context must be 168 hours");
  metrics::PointForecast f;
  std::copy(context.begin() + (kContextHours - kHorizonHours), context.end(), f.values.begin());
  return f;
}

metrics::PointForecast previous_week(std::span<const double> context) {
  if (context.size() != kContextHours) fail(ErrorKind::Usage, "context must be 168 hours");
  metrics::PointForecast f;
  std::copy(context.begin(), context.begin() + kHorizonHours, f.values.begin());
  return f;
}

metrics::GaussianForecast persistence_ensemble(std::span<const double> context) {
  if (context.size() != kContextHours) fail(ErrorKind::Usage, "context must be 168 hours");
  metrics::GaussianForecast f;
  // Context index 167 is the last observed hour t; hour t + i lies 24 j hours
  // after context index 167 + i - 24 j.
  for (std::size_t i = 1; i <= kHorizonHours; ++i) {
    double sum = 0.0;
    for (std::size_t j = 1; j <= 7; ++j) sum += context[kContextHours - 1 + i - 24 * j];
    const double mu = sum / 7.0;
    double sq = 0.0;
    for (std::size_t j = 1; j <= 7; ++j) {
      const double d = context[kContextHours - 1 + i - 24 * j] - mu;
      sq += d * d;
    }
    f.mu[i - 1] = mu;
    f.sigma[i - 1] = std::sqrt(sq / 7.0);
  }
  return f;
}

void TrainSchedule::validate() const {
  if (max_epochs == 0) fail(ErrorKind::Usage, "max_epochs must be >= 1");
  if (patience == 0) fail(ErrorKind::Usage, "patience must be >= 1");
  if (lr_grid.empty()) fail(ErrorKind::Usage, "learning-rate grid is empty");
  for (double lr : lr_grid) {
    if (!(lr > 0.0)) fail(ErrorKind::Usage, "learning rates must be > 0");
  }
  if (steps_per_epoch == 0) fail(ErrorKind::Usage, "steps_per_epoch must be >= 1");
}

namespace {

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> s) {
  return {s.data(), static_cast<Eigen::Index>(s.size())};
}

HourArray to_hours(const Eigen::VectorXd& v) {
  HourArray out{};
  for (std::size_t h = 0; h < kHorizonHours; ++h) out[h] = v(static_cast<Eigen::Index>(h));
  return out;
}

struct Design {
  Eigen::MatrixXd x;  // N x 168
  Eigen::MatrixXd y;  // N x 24
};

Design raw_design(std::span<const Window> windows) {
  const auto n = static_cast<Eigen::Index>(windows.size());
  Design d{Eigen::MatrixXd(n, kContextHours), Eigen::MatrixXd(n, kHorizonHours)};
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& w = windows[static_cast<std::size_t>(r)];
    d.x.row(r) = as_vector(w.context.values()).transpose();
    d.y.row(r) = as_vector(w.target.values()).transpose();
  }
  return d;
}

}  // namespace

HourArray LinearDirectModel::predict(std::span<const double> context) const {
  if (context.size() != kContextHours) fail(ErrorKind::Usage, "context must be 168 hours");
  Eigen::VectorXd out = weights * as_vector(context);
  if (use_bias) out += bias;
  return to_hours(out);
}

LinearDirectModel fit_linear_direct(std::span<const Window> windows, bool use_bias) {
  if (windows.empty()) fail(ErrorKind::Data, "linear fit needs at least one training window");
  auto d = raw_design(windows);
  LinearDirectModel m;
  m.use_bias = use_bias;
  Eigen::RowVectorXd x_mean = Eigen::RowVectorXd::Zero(kContextHours);
  Eigen::RowVectorXd y_mean = Eigen::RowVectorXd::Zero(kHorizonHours);
  if (use_bias) {
    x_mean = d.x.colwise().mean();
    y_mean = d.y.colwise().mean();
    d.x.rowwise() -= x_mean;
    d.y.rowwise() -= y_mean;
  }
  Eigen::MatrixXd gram = d.x.transpose() * d.x;
  gram.diagonal().array() += kRidge;
  const Eigen::MatrixXd rhs = d.x.transpose() * d.y;  // 168 x 24
  m.weights = gram.ldlt().solve(rhs).transpose();
  if (use_bias) m.bias = y_mean.transpose() - m.weights * x_mean.transpose();
  if (!m.weights.allFinite() || !m.bias.allFinite()) {
    fail(ErrorKind::Data, "linear fit produced non-finite parameters");
  }
  return m;
}

double linear_mse(const LinearDirectModel& model, std::span<const Window> windows) {
  return linear_mse_gradient(model, windows).loss;
}

LinearGradient linear_mse_gradient(const LinearDirectModel& model, std::span<const Window> windows) {
  if (windows.empty()) fail(ErrorKind::Data, "loss over zero windows");
  const auto d = raw_design(windows);
  Eigen::MatrixXd err = d.x * model.weights.transpose() - d.y;
  if (model.use_bias) err.rowwise() += model.bias.transpose();
  const double scale = 1.0 / static_cast<double>(err.size());
  LinearGradient g;
  g.loss = err.squaredNorm() * scale;
  g.d_weights = 2.0 * scale * err.transpose() * d.x;
  g.d_bias = model.use_bias ? Eigen::VectorXd(2.0 * scale * err.colwise().sum().transpose())
                            : Eigen::VectorXd::Zero(kHorizonHours);
  return g;
}

void decompose(std::span<const double> x, std::size_t kernel_size, std::vector<double>& trend,
               std::vector<double>& residual) {
  if (kernel_size == 0 || kernel_size % 2 == 0 || kernel_size > kContextHours) {
    fail(ErrorKind::Usage, "moving-average kernel must be odd and <= 168");
  }
  if (x.empty()) fail(ErrorKind::Usage, "cannot decompose an empty sequence");
  const auto half = static_cast<long>(kernel_size / 2);
  const auto n = static_cast<long>(x.size());
  trend.assign(x.size(), 0.0);
  residual.assign(x.size(), 0.0);
  for (long i = 0; i < n; ++i) {
    double sum = 0.0;
    for (long j = i - half; j <= i + half; ++j) sum += x[static_cast<std::size_t>(std::clamp(j, 0L, n - 1))];
    trend[static_cast<std::size_t>(i)] = sum / static_cast<double>(kernel_size);
  }
  for (std::size_t i = 0; i < x.size(); ++i) residual[i] = x[i] - trend[i];
}

DLinearModel DLinearModel::initial(std::size_t kernel_size, bool use_bias) {
  DLinearModel m;
  m.kernel_size = kernel_size;
  m.use_bias = use_bias;
  m.trend_weights = Eigen::MatrixXd::Constant(kHorizonHours, kContextHours, 1.0 / kContextHours);
  m.residual_weights = m.trend_weights;
  m.trend_bias = Eigen::VectorXd::Zero(kHorizonHours);
  m.residual_bias = Eigen::VectorXd::Zero(kHorizonHours);
  return m;
}

namespace {

struct ScaledDesign {
  Eigen::MatrixXd trend, residual;  // N x 168
  Eigen::MatrixXd y;                // N x 24
};

ScaledDesign scaled_design(const DLinearModel& m, std::span<const Window> windows) {
  const auto n = static_cast<Eigen::Index>(windows.size());
  ScaledDesign d{Eigen::MatrixXd(n, kContextHours), Eigen::MatrixXd(n, kContextHours),
                 Eigen::MatrixXd(n, kHorizonHours)};
  std::vector<double> scaled(kContextHours), trend, residual;
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& w = windows[static_cast<std::size_t>(r)];
    const auto ctx = w.context.values();
    for (std::size_t i = 0; i < kContextHours; ++i) scaled[i] = transform::standard_forward(ctx[i], m.scaler);
    decompose(scaled, m.kernel_size, trend, residual);
    d.trend.row(r) = as_vector(trend).transpose();
    d.residual.row(r) = as_vector(residual).transpose();
    const auto tgt = w.target.values();
    for (std::size_t h = 0; h < kHorizonHours; ++h) {
      d.y(r, static_cast<Eigen::Index>(h)) = transform::standard_forward(tgt[h], m.scaler);
    }
  }
  return d;
}

Eigen::MatrixXd dlinear_error(const DLinearModel& m, const ScaledDesign& d) {
  Eigen::MatrixXd err = d.trend * m.trend_weights.transpose() +
                        d.residual * m.residual_weights.transpose() - d.y;
  if (m.use_bias) err.rowwise() += (m.trend_bias + m.residual_bias).transpose();
  return err;
}

DLinearGradient gradient_on(const DLinearModel& m, const ScaledDesign& d) {
  const Eigen::MatrixXd err = dlinear_error(m, d);
  const double scale = 1.0 / static_cast<double>(err.size());
  DLinearGradient g;
  g.loss = err.squaredNorm() * scale;
  g.d_trend_weights = 2.0 * scale * err.transpose() * d.trend;
  g.d_residual_weights = 2.0 * scale * err.transpose() * d.residual;
  if (m.use_bias) {
    g.d_trend_bias = 2.0 * scale * err.colwise().sum().transpose();
  } else {
    g.d_trend_bias = Eigen::VectorXd::Zero(kHorizonHours);
  }
  g.d_residual_bias = g.d_trend_bias;
  return g;
}

}  // namespace

HourArray DLinearModel::predict(std::span<const double> context) const {
  if (context.size() != kContextHours) fail(ErrorKind::Usage, "context must be 168 hours");
  std::vector<double> scaled(kContextHours), trend, residual;
  for (std::size_t i = 0; i < kContextHours; ++i) scaled[i] = transform::standard_forward(context[i], scaler);
  decompose(scaled, kernel_size, trend, residual);
  Eigen::VectorXd out = trend_weights * as_vector(trend) + residual_weights * as_vector(residual);
  if (use_bias) out += trend_bias + residual_bias;
  for (Eigen::Index h = 0; h < out.size(); ++h) out(h) = transform::standard_inverse(out(h), scaler);
  return to_hours(out);
}

double dlinear_mse(const DLinearModel& model, std::span<const Window> windows) {
  if (windows.empty()) fail(ErrorKind::Data, "loss over zero windows");
  return dlinear_error(model, scaled_design(model, windows)).squaredNorm() /
         static_cast<double>(windows.size() * kHorizonHours);
}

DLinearGradient dlinear_mse_gradient(const DLinearModel& model, std::span<const Window> windows) {
  if (windows.empty()) fail(ErrorKind::Data, "loss over zero windows");
  return gradient_on(model, scaled_design(model, windows));
}

TrainResult<DLinearModel> fit_dlinear(std::span<const Window> train, std::span<const Window> val,
                                      const TrainSchedule& schedule, std::size_t kernel_size,
                                      bool use_bias) {
  schedule.validate();
  if (train.empty()) fail(ErrorKind::Data, "DLinear fit needs at least one training window");
  if (val.empty() && train.size() >= 2) {
    const std::size_t n_val = std::max<std::size_t>(1, train.size() / 6);
    val = train.subspan(train.size() - n_val);
    train = train.subspan(0, train.size() - n_val);
  } else if (val.empty()) {
    val = train;
  }

  auto base = DLinearModel::initial(kernel_size, use_bias);
  std::vector<double> values;
  for (const auto& w : train) {
    values.insert(values.end(), w.context.values().begin(), w.context.values().end());
    values.insert(values.end(), w.target.values().begin(), w.target.values().end());
  }
  try {
    base.scaler = transform::standard_fit(values);
  } catch (const Error&) {
    base.scaler = {values.front(), 1.0};  // constant building
  }
  const auto train_design = scaled_design(base, train);
  const auto val_design = scaled_design(base, val);

  std::optional<TrainResult<DLinearModel>> best;
  for (double lr : schedule.lr_grid) {
    auto result = train_with_early_stopping(
        base,
        [&](DLinearModel& m) {
          for (std::size_t s = 0; s < schedule.steps_per_epoch; ++s) {
            const auto g = gradient_on(m, train_design);
            m.trend_weights -= lr * g.d_trend_weights;
            m.residual_weights -= lr * g.d_residual_weights;
            m.trend_bias -= lr * g.d_trend_bias;
            m.residual_bias -= lr * g.d_residual_bias;
          }
        },
        [&](const DLinearModel& m) {
          const double loss = dlinear_error(m, val_design).squaredNorm() /
                              static_cast<double>(val_design.y.size());
          return std::isfinite(loss) ? loss : std::numeric_limits<double>::infinity();
        },
        schedule.max_epochs, schedule.patience);
    result.history.learning_rate = lr;
    if (!best || result.history.best_val_loss < best->history.best_val_loss) best = std::move(result);
  }
  return std::move(*best);
}

void LinearDirect::fit(std::span<const Window> train, std::span<const Window> /*val*/) {
  model_ = fit_linear_direct(train, use_bias_);
}

ForecastDistribution LinearDirect::predict(const Window& w) const {
  metrics::PointForecast f;
  f.values = model_.predict(w.context.values());
  // Loads are nonnegative.
  for (auto& v : f.values) v = std::max(v, 0.0);
  return f;
}

void DLinear::fit(std::span<const Window> train, std::span<const Window> val) {
  auto result = fit_dlinear(train, val, schedule_, kernel_size_, use_bias_);
  model_ = std::move(result.model);
  history_ = std::move(result.history);
}

ForecastDistribution DLinear::predict(const Window& w) const {
  metrics::PointForecast f;
  f.values = model_.predict(w.context.values());
  for (auto& v : f.values) v = std::max(v, 0.0);
  return f;
}

namespace {

struct HourRow {
  bool present = false;
  double p1 = 0.0, p2 = 0.0;
  std::vector<double> mass;
};

struct DayRows {
  std::string kind;
  bool mixed = false;
  std::array<HourRow, kHorizonHours> hours;
};

}  // namespace

PredictionFileResult score_prediction_file(const std::string& path, const store::Corpus& actuals,
                                           const metrics::ScoringContext& ctx) {
  const auto lines = text::read_lines(path);
  if (lines.empty() || !text::trim(lines[0]).starts_with("building,day_index,hour,kind")) {
    fail(ErrorKind::Data, path + ": expected header 'building,day_index,hour,kind,p1,...'");
  }
  std::map<std::string, const store::CorpusBuilding*> by_id;
  for (const auto& b : actuals.buildings) by_id[b.record.id] = &b;

  PredictionFileResult result;
  const auto reject = [&](std::size_t line_no, const std::string& why) {
    ++result.rows_rejected;
    if (result.rejections.size() < 20) {
      result.rejections.push_back("line " + std::to_string(line_no) + ": " + why);
    }
  };

  std::map<std::string, std::map<std::size_t, DayRows>> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto line = text::trim(lines[i]);
    if (line.empty()) continue;
    ++result.rows_total;
    const auto f = text::split(line, ',');
    if (f.size() < 5) {
      reject(i + 1, "too few fields");
      continue;
    }
    const std::string id(text::trim(f[0]));
    const auto b = by_id.find(id);
    if (b == by_id.end()) {
      reject(i + 1, "unknown building '" + id + "'");
      continue;
    }
    try {
      const auto day = text::parse_int(f[1]);
      const auto hour = text::parse_int(f[2]);
      if (day < 0 || static_cast<std::size_t>(day + 1) * kHorizonHours > b->second->series.size()) {
        reject(i + 1, "day_index outside the building's actuals");
        continue;
      }
      if (hour < 0 || hour >= static_cast<std::int64_t>(kHorizonHours)) {
        reject(i + 1, "hour must lie in [0, 23] (horizon is 24 hours)");
        continue;
      }
      const std::string kind(text::trim(f[3]));
      HourRow row;
      row.present = true;
      if (kind == "point") {
        if (f.size() != 5) throw Error(ErrorKind::Data, "point rows take exactly one parameter");
        row.p1 = text::parse_double(f[4]);
      } else if (kind == "gaussian") {
        if (f.size() != 6) throw Error(ErrorKind::Data, "gaussian rows take mu and sigma");
        row.p1 = text::parse_double(f[4]);
        row.p2 = text::parse_double(f[5]);
        if (!(row.p2 >= 0.0) || !std::isfinite(row.p2)) throw Error(ErrorKind::Data, "sigma must be >= 0");
      } else if (kind == "categorical") {
        if (!ctx.vocab) throw Error(ErrorKind::Data, "categorical row but no vocabulary supplied");
        row.mass.assign(ctx.vocab->size(), 0.0);
        std::vector<bool> seen(ctx.vocab->size(), false);
        double total = 0.0;
        for (std::size_t k = 4; k < f.size(); ++k) {
          const auto pair = text::split(text::trim(f[k]), ':');
          if (pair.size() != 2) throw Error(ErrorKind::Data, "mass entries must be index:value");
          const auto t = text::parse_int(pair[0]);
          if (t < 0 || static_cast<std::size_t>(t) >= ctx.vocab->size() || seen[static_cast<std::size_t>(t)]) {
            throw Error(ErrorKind::Data, "bad or repeated token index");
          }
          seen[static_cast<std::size_t>(t)] = true;
          const double m = text::parse_double(pair[1]);
          if (!(m >= 0.0)) throw Error(ErrorKind::Data, "negative mass");
          row.mass[static_cast<std::size_t>(t)] = m;
          total += m;
        }
        if (std::abs(total - 1.0) > 1e-6) throw Error(ErrorKind::Data, "categorical mass not normalized");
      } else {
        throw Error(ErrorKind::Data, "unknown kind '" + kind + "'");
      }
      if (!std::isfinite(row.p1)) throw Error(ErrorKind::Data, "non-finite parameter");

      auto& d = rows[id][static_cast<std::size_t>(day)];
      if (d.kind.empty()) d.kind = kind;
      if (d.kind != kind) d.mixed = true;
      auto& slot = d.hours[static_cast<std::size_t>(hour)];
      if (slot.present) {
        reject(i + 1, "duplicate row for this building, day and hour");
        continue;
      }
      slot = std::move(row);
    } catch (const Error& e) {
      reject(i + 1, e.what());
    }
  }

  for (const auto& [id, days] : rows) {
    const auto& building = *by_id.at(id);
    std::vector<HourArray> actual_days;
    std::vector<ForecastDistribution> forecasts;
    for (const auto& [day, d] : days) {
      const bool complete = std::all_of(d.hours.begin(), d.hours.end(),
                                        [](const HourRow& r) { return r.present; });
      if (!complete || d.mixed) {
        ++result.days_rejected;
        continue;
      }
      HourArray actual{};
      for (std::size_t h = 0; h < kHorizonHours; ++h) actual[h] = building.series[day * kHorizonHours + h];
      actual_days.push_back(actual);
      if (d.kind == "point") {
        metrics::PointForecast p;
        for (std::size_t h = 0; h < kHorizonHours; ++h) p.values[h] = d.hours[h].p1;
        forecasts.emplace_back(p);
      } else if (d.kind == "gaussian") {
        metrics::GaussianForecast g;
        g.boxcox_space = ctx.boxcox != nullptr;
        for (std::size_t h = 0; h < kHorizonHours; ++h) {
          g.mu[h] = d.hours[h].p1;
          g.sigma[h] = d.hours[h].p2;
        }
        forecasts.emplace_back(g);
      } else {
        metrics::CategoricalForecast c;
        for (const auto& r : d.hours) c.mass.push_back(r.mass);
        forecasts.emplace_back(std::move(c));
      }
    }
    if (actual_days.empty()) {
      result.incomplete.push_back(id);
      continue;
    }
    try {
      result.scores.push_back(metrics::score_building(id, building.record.dataset_name, actual_days,
                                                      forecasts, ctx));
    } catch (const metrics::UndefinedScore&) {
      result.undefined.push_back(id);
    }
  }
  return result;
}

}  // namespace loadbench::forecast
