#include "loadbench/loadbench.h"

#include <algorithm>
#include <cstring>
#include <new>
#include <string>

#include "loadbench/bench.hpp"
#include "loadbench/error.hpp"
#include "loadbench/forecast.hpp"
#include "loadbench/kvconfig.hpp"
#include "loadbench/metrics.hpp"
#include "loadbench/store.hpp"
#include "loadbench/text.hpp"
#include "loadbench/tokenizer.hpp"
#include "loadbench/transform.hpp"

struct lb_config {
  loadbench::KvConfig kv;
};
struct lb_vocab {
  loadbench::tokenizer::TokenVocabulary vocab;
};
struct lb_boxcox {
  loadbench::transform::BoxCoxParams params;
};
struct lb_index {
  loadbench::store::IndexReader reader;
};

namespace {

using loadbench::Error;
using loadbench::ErrorKind;

thread_local std::string last_error;
thread_local std::string last_text;

lb_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage:
      return LB_ERR_USAGE;
    case ErrorKind::Internal:
      return LB_ERR_INTERNAL;
    default:
      return LB_ERR_DATA;
  }
}

template <class Fn>
lb_status guarded(Fn&& fn) {
  try {
    last_error.clear();
    fn();
    return LB_OK;
  } catch (const Error& e) {
    last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return LB_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = std::string("internal error: ") + e.what();
    return LB_ERR_INTERNAL;
  } catch (...) {
    last_error = "internal error";
    return LB_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) loadbench::fail(ErrorKind::Usage, std::string(what) + " must not be null");
}

std::span<const double> view(const double* p, std::size_t n, const char* what) {
  if (n > 0) need(p, what);
  return {p, n};
}

}  // namespace

extern "C" {

const char* lb_version(void) { return loadbench::bench::kToolVersion; }
const char* lb_last_error(void) { return last_error.c_str(); }

lb_status lb_config_create(lb_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new lb_config{};
  });
}

void lb_config_destroy(lb_config* config) { delete config; }

lb_status lb_config_load(lb_config* config, const char* path) {
  return guarded([&] {
    need(config, "config");
    need(path, "path");
    config->kv.merge_file(path);
  });
}

lb_status lb_config_set(lb_config* config, const char* key, const char* value) {
  return guarded([&] {
    need(config, "config");
    need(key, "key");
    need(value, "value");
    config->kv.set(key, value);
  });
}

lb_status lb_config_get(const lb_config* config, const char* key, char* buf, size_t cap,
                        size_t* needed) {
  return guarded([&] {
    need(config, "config");
    need(key, "key");
    const auto v = config->kv.get(key);
    if (!v) loadbench::fail(ErrorKind::Usage, std::string("no such key: ") + key);
    if (needed) *needed = v->size() + 1;
    if (buf && cap > v->size()) std::memcpy(buf, v->c_str(), v->size() + 1);
  });
}

lb_status lb_run(const char* command, const lb_config* config, const char** summary) {
  return guarded([&] {
    need(command, "command");
    need(config, "config");
    last_text = loadbench::bench::run_command(command, config->kv);
    if (summary) *summary = last_text.c_str();
  });
}

lb_status lb_gaussian_crps(double y, double mu, double sigma, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = loadbench::metrics::gaussian_crps(y, mu, sigma);
  });
}

lb_status lb_nrmse(const double* actual, const double* pred, size_t n, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = loadbench::metrics::nrmse(view(actual, n, "actual"), view(pred, n, "pred"));
  });
}

lb_status lb_nmae(const double* actual, const double* pred, size_t n, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = loadbench::metrics::nmae(view(actual, n, "actual"), view(pred, n, "pred"));
  });
}

lb_status lb_nmbe(const double* actual, const double* pred, size_t n, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = loadbench::metrics::nmbe(view(actual, n, "actual"), view(pred, n, "pred"));
  });
}

lb_status lb_probability_of_improvement(const double* x, const double* y, size_t n, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = loadbench::metrics::probability_of_improvement(view(x, n, "x"), view(y, n, "y"));
  });
}

lb_status lb_previous_day(const double* context, double* out) {
  return guarded([&] {
    need(out, "out");
    const auto f = loadbench::forecast::previous_day(view(context, loadbench::kContextHours, "context"));
    std::copy(f.values.begin(), f.values.end(), out);
  });
}

lb_status lb_previous_week(const double* context, double* out) {
  return guarded([&] {
    need(out, "out");
    const auto f = loadbench::forecast::previous_week(view(context, loadbench::kContextHours, "context"));
    std::copy(f.values.begin(), f.values.end(), out);
  });
}

lb_status lb_persistence_ensemble(const double* context, double* mu, double* sigma) {
  return guarded([&] {
    need(mu, "mu");
    need(sigma, "sigma");
    const auto f =
        loadbench::forecast::persistence_ensemble(view(context, loadbench::kContextHours, "context"));
    std::copy(f.mu.begin(), f.mu.end(), mu);
    std::copy(f.sigma.begin(), f.sigma.end(), sigma);
  });
}

lb_status lb_vocab_fit(const double* samples, size_t n, size_t k, double tau, uint64_t seed,
                       lb_vocab** out) {
  return guarded([&] {
    need(out, "out");
    *out = new lb_vocab{loadbench::tokenizer::fit(view(samples, n, "samples"), k, tau, seed)};
  });
}

lb_status lb_vocab_load(const char* path, lb_vocab** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new lb_vocab{
        loadbench::tokenizer::parse_vocabulary(loadbench::text::read_file(path))};
  });
}

lb_status lb_vocab_save(const lb_vocab* vocab, const char* path) {
  return guarded([&] {
    need(vocab, "vocab");
    need(path, "path");
    loadbench::text::write_file(path, loadbench::tokenizer::serialize(vocab->vocab));
  });
}

void lb_vocab_destroy(lb_vocab* vocab) { delete vocab; }

size_t lb_vocab_size(const lb_vocab* vocab) { return vocab ? vocab->vocab.size() : 0; }

lb_status lb_vocab_encode(const lb_vocab* vocab, double x, size_t* token) {
  return guarded([&] {
    need(vocab, "vocab");
    need(token, "token");
    *token = loadbench::tokenizer::encode(x, vocab->vocab);
  });
}

lb_status lb_vocab_decode(const lb_vocab* vocab, size_t token, double* x) {
  return guarded([&] {
    need(vocab, "vocab");
    need(x, "x");
    *x = loadbench::tokenizer::decode(token, vocab->vocab);
  });
}

lb_status lb_categorical_rps(const lb_vocab* vocab, size_t y_token, const double* mass, size_t n,
                             double* out) {
  return guarded([&] {
    need(vocab, "vocab");
    need(out, "out");
    *out = loadbench::metrics::categorical_rps(y_token, view(mass, n, "mass"), vocab->vocab);
  });
}

lb_status lb_boxcox_fit(const double* samples, size_t n, lb_boxcox** out) {
  return guarded([&] {
    need(out, "out");
    *out = new lb_boxcox{loadbench::transform::boxcox_fit(view(samples, n, "samples"))};
  });
}

lb_status lb_boxcox_create(double lambda, double shift, lb_boxcox** out) {
  return guarded([&] {
    need(out, "out");
    if (!std::isfinite(lambda) || !(shift >= 0.0)) {
      loadbench::fail(ErrorKind::Usage, "lambda must be finite and shift >= 0");
    }
    *out = new lb_boxcox{{lambda, shift}};
  });
}

void lb_boxcox_destroy(lb_boxcox* boxcox) { delete boxcox; }
double lb_boxcox_lambda(const lb_boxcox* boxcox) { return boxcox ? boxcox->params.lambda : 0.0; }
double lb_boxcox_shift(const lb_boxcox* boxcox) { return boxcox ? boxcox->params.shift : 0.0; }

lb_status lb_boxcox_forward(const lb_boxcox* boxcox, double x, double* out) {
  return guarded([&] {
    need(boxcox, "boxcox");
    need(out, "out");
    *out = loadbench::transform::boxcox_forward(x, boxcox->params);
  });
}

lb_status lb_boxcox_inverse(const lb_boxcox* boxcox, double y, double* out) {
  return guarded([&] {
    need(boxcox, "boxcox");
    need(out, "out");
    *out = loadbench::transform::boxcox_inverse(y, boxcox->params);
  });
}

lb_status lb_boxcox_backproject(const lb_boxcox* boxcox, double mu, double sigma, double* mu_out,
                                double* sigma_out, int* low_confidence) {
  return guarded([&] {
    need(boxcox, "boxcox");
    need(mu_out, "mu_out");
    need(sigma_out, "sigma_out");
    const auto b = loadbench::transform::backproject_gaussian(mu, sigma, boxcox->params);
    *mu_out = b.mu;
    *sigma_out = b.sigma;
    if (low_confidence) *low_confidence = b.low_confidence ? 1 : 0;
  });
}

lb_status lb_index_open(const char* path, lb_index** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new lb_index{loadbench::store::IndexReader::open(path)};
  });
}

void lb_index_close(lb_index* index) { delete index; }
size_t lb_index_size(const lb_index* index) { return index ? index->reader.size() : 0; }

lb_status lb_index_fetch(const lb_index* index, size_t n, double* context, double* target,
                         const char** building_id) {
  return guarded([&] {
    need(index, "index");
    need(context, "context");
    need(target, "target");
    const auto w = index->reader.fetch(n);
    const auto c = w.window.context.values();
    const auto t = w.window.target.values();
    std::copy(c.begin(), c.end(), context);
    std::copy(t.begin(), t.end(), target);
    last_text = w.building_id;
    if (building_id) *building_id = last_text.c_str();
  });
}

}  // extern "C"
