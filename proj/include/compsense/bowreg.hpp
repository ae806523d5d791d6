#pragma once

// Softmax regression over lexical indicator features: the bag-of-words
// approximation used to score how lexically misleading an example is.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "compsense/common.hpp"
#include "compsense/corpus.hpp"
#include "compsense/label.hpp"
#include "compsense/lexfeat.hpp"

namespace compsense {

struct TrainConfig {
  double l2 = 1e-6;
  int epochs = 3;
  std::size_t batch_size = 256;
  // Inverse-time decay: rate(t) = learning_rate / (1 + lr_decay * t), t = step.
  double learning_rate = 2.0;
  double lr_decay = 1e-4;
  std::uint64_t seed = 0x5eedULL;
  bool bias_enabled = true;
  // Examples held in memory for per-epoch shuffling.
  std::size_t shuffle_buffer = std::size_t{1} << 18;

  void validate() const {
    if (epochs < 1) throw UsageError("epochs must be >= 1");
    if (!(l2 >= 0) || !std::isfinite(l2)) throw UsageError("l2 must be a finite nonnegative number");
    if (!(learning_rate > 0) || !std::isfinite(learning_rate)) throw UsageError("learning rate must be > 0");
    if (!(lr_decay >= 0) || !std::isfinite(lr_decay)) throw UsageError("lr_decay must be >= 0");
    if (batch_size == 0) throw UsageError("batch size must be >= 1");
    if (shuffle_buffer < batch_size) throw UsageError("shuffle buffer must hold at least one batch");
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Weights are stored row-major by feature: weights[3 * i + c].
struct SoftmaxModel {
  static constexpr std::string_view kMagic = "#compsense-bow";
  static constexpr int kFormatVersion = 1;

  std::size_t dim = 0;
  std::vector<double> weights;
  Probs bias{0.0, 0.0, 0.0};
  bool bias_enabled = true;
  std::uint64_t vocab_fingerprint = 0;
  TrainConfig config;

  static SoftmaxModel zeros(std::size_t dim, std::uint64_t vocab_fingerprint, bool bias_enabled = true) {
    SoftmaxModel m;
    m.dim = dim;
    m.weights.assign(3 * dim, 0.0);
    m.bias_enabled = bias_enabled;
    m.vocab_fingerprint = vocab_fingerprint;
    return m;
  }

  double& weight(Label c, std::size_t i) { return weights[3 * i + index_of(c)]; }
  double weight(Label c, std::size_t i) const { return weights[3 * i + index_of(c)]; }

  std::string serialize() const;
  std::uint64_t fingerprint() const { return fnv1a64(serialize()); }
  void save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }
  static SoftmaxModel parse(std::string_view text);
  static SoftmaxModel load(const std::filesystem::path& path) { return parse(read_file(path)); }

  friend bool operator==(const SoftmaxModel&, const SoftmaxModel&) = default;
};

inline Probs logits(const SoftmaxModel& m, const FeatureVector& v) {
  Probs z = m.bias_enabled ? m.bias : Probs{0.0, 0.0, 0.0};
  for (std::uint32_t i : v.indices) {
    if (i >= m.dim) {
      throw DataError("feature index " + std::to_string(i) + " outside model dimension " +
                      std::to_string(m.dim));
    }
    const double* row = &m.weights[3 * static_cast<std::size_t>(i)];
    z[0] += row[0];
    z[1] += row[1];
    z[2] += row[2];
  }
  return z;
}

// Max-subtracted softmax; finite for any finite logits.
inline Probs softmax(const Probs& z) {
  const double mx = std::max({z[0], z[1], z[2]});
  Probs p{std::exp(z[0] - mx), std::exp(z[1] - mx), std::exp(z[2] - mx)};
  const double s = p[0] + p[1] + p[2];
  for (double& x : p) x /= s;
  return p;
}

inline double log_sum_exp(const Probs& z) {
  const double mx = std::max({z[0], z[1], z[2]});
  return mx + std::log(std::exp(z[0] - mx) + std::exp(z[1] - mx) + std::exp(z[2] - mx));
}

inline Probs predict_proba(const SoftmaxModel& m, const FeatureVector& v) { return softmax(logits(m, v)); }

struct LabeledVector {
  FeatureVector features;
  Label label = Label::kEntailment;
};

struct Gradient {
  std::vector<double> weights;  // same layout as SoftmaxModel::weights
  Probs bias{0.0, 0.0, 0.0};
};

struct LossAndGrad {
  double loss = 0.0;
  Gradient grad;
};

// Mean negative log-likelihood plus (l2 / 2) * ||weights||^2 (bias is not
// penalized), with its exact gradient.
inline LossAndGrad loss_and_grad(const SoftmaxModel& m, std::span<const LabeledVector> batch, double l2) {
  if (batch.empty()) throw DataError("loss_and_grad needs a nonempty batch");
  LossAndGrad out;
  out.grad.weights.assign(m.weights.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double nll = 0.0;
  for (const LabeledVector& ex : batch) {
    const Probs z = logits(m, ex.features);
    const Probs p = softmax(z);
    const std::size_t y = index_of(ex.label);
    nll += log_sum_exp(z) - z[y];
    Probs delta = p;
    delta[y] -= 1.0;
    for (std::uint32_t i : ex.features.indices) {
      for (std::size_t c = 0; c < 3; ++c) out.grad.weights[3 * i + c] += delta[c] * inv_n;
    }
    if (m.bias_enabled) {
      for (std::size_t c = 0; c < 3; ++c) out.grad.bias[c] += delta[c] * inv_n;
    }
  }
  double sq = 0.0;
  for (std::size_t k = 0; k < m.weights.size(); ++k) {
    sq += m.weights[k] * m.weights[k];
    out.grad.weights[k] += l2 * m.weights[k];
  }
  out.loss = nll * inv_n + 0.5 * l2 * sq;
  return out;
}

struct EpochLog {
  int epoch = 0;
  std::size_t examples = 0;
  double mean_nll = 0.0;   // averaged over batches, before each update
  double objective = 0.0;  // full regularized loss proxy at epoch end: mean_nll + l2/2 ||w||^2
};

struct TrainResult {
  SoftmaxModel model;
  std::vector<EpochLog> epochs;
};

namespace detail {

// SGD state with the L2 shrinkage folded into a global scale:
// true weights = scale * stored.
class SgdState {
 public:
  SgdState(SoftmaxModel& m, const TrainConfig& cfg) : m_(m), cfg_(cfg) {}

  // Returns mean NLL of the batch under the pre-update weights.
  double step(std::span<const LabeledVector> batch) {
    const double rate = cfg_.learning_rate / (1.0 + cfg_.lr_decay * static_cast<double>(t_));
    ++t_;
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    deltas_.resize(batch.size());
    double nll = 0.0;
    for (std::size_t k = 0; k < batch.size(); ++k) {
      Probs z = m_.bias_enabled ? m_.bias : Probs{0.0, 0.0, 0.0};
      for (std::uint32_t i : batch[k].features.indices) {
        const double* row = &m_.weights[3 * static_cast<std::size_t>(i)];
        z[0] += scale_ * row[0];
        z[1] += scale_ * row[1];
        z[2] += scale_ * row[2];
      }
      const std::size_t y = index_of(batch[k].label);
      nll += log_sum_exp(z) - z[y];
      Probs d = softmax(z);
      d[y] -= 1.0;
      deltas_[k] = d;
    }
    // Data step on the touched rows, then the proximal L2 step
    // w <- w / (1 + rate * l2) applied through the scale.
    const double coef = rate * inv_n / scale_;
    for (std::size_t k = 0; k < batch.size(); ++k) {
      const Probs& d = deltas_[k];
      for (std::uint32_t i : batch[k].features.indices) {
        double* row = &m_.weights[3 * static_cast<std::size_t>(i)];
        row[0] -= coef * d[0];
        row[1] -= coef * d[1];
        row[2] -= coef * d[2];
      }
      if (m_.bias_enabled) {
        for (std::size_t c = 0; c < 3; ++c) m_.bias[c] -= rate * inv_n * d[c];
      }
    }
    scale_ /= 1.0 + rate * cfg_.l2;
    if (scale_ < 1e-30) materialize();
    return nll * inv_n;
  }

  void materialize() {
    if (scale_ == 1.0) return;
    for (double& w : m_.weights) w *= scale_;
    scale_ = 1.0;
  }

 private:
  SoftmaxModel& m_;
  const TrainConfig& cfg_;
  double scale_ = 1.0;
  std::uint64_t t_ = 0;
  std::vector<Probs> deltas_;
};

}  // namespace detail

// Seeded mini-batch SGD. Each epoch streams the source once through a
// shuffle buffer of cfg.shuffle_buffer examples; the permutation for epoch e
// comes from SplitMix64(seed).split(e). Undetermined examples are skipped.
// Throws Error on a non-finite loss, naming epoch and batch.
inline TrainResult train(const ExampleSource& source, const Vocabulary& vocab, const TrainConfig& cfg,
                         const std::function<void(const EpochLog&)>& on_epoch = {}) {
  cfg.validate();
  TrainResult result;
  SoftmaxModel& m = result.model;
  m = SoftmaxModel::zeros(vocab.dim(), vocab.fingerprint(), cfg.bias_enabled);
  m.config = cfg;
  detail::SgdState sgd(m, cfg);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    SplitMix64 rng = SplitMix64(cfg.seed).split(static_cast<std::uint64_t>(epoch));
    std::vector<LabeledVector> buffer;
    buffer.reserve(std::min<std::size_t>(cfg.shuffle_buffer, 1 << 16));
    std::size_t batch_no = 0;
    std::size_t seen = 0;
    double nll_sum = 0.0;

    auto flush = [&](bool final) {
      fisher_yates(buffer, rng);
      std::size_t start = 0;
      while (buffer.size() - start >= cfg.batch_size || (final && start < buffer.size())) {
        const std::size_t n = std::min(cfg.batch_size, buffer.size() - start);
        ++batch_no;
        const double nll = sgd.step(std::span<const LabeledVector>(buffer.data() + start, n));
        if (!std::isfinite(nll)) {
          throw Error("non-finite training loss at epoch " + std::to_string(epoch) + " batch " +
                      std::to_string(batch_no));
        }
        nll_sum += nll;
        start += n;
      }
      buffer.erase(buffer.begin(), buffer.begin() + static_cast<std::ptrdiff_t>(start));
    };

    source([&](const NliExample& ex) {
      if (!ex.gold) return;
      buffer.push_back({featurize(ex, vocab), *ex.gold});
      ++seen;
      if (buffer.size() >= cfg.shuffle_buffer) flush(false);
    });
    flush(true);
    if (seen == 0) throw DataError("no determined-gold training examples");

    sgd.materialize();
    EpochLog log;
    log.epoch = epoch;
    log.examples = seen;
    log.mean_nll = nll_sum / static_cast<double>(batch_no);
    double sq = 0.0;
    for (double w : m.weights) sq += w * w;
    log.objective = log.mean_nll + 0.5 * cfg.l2 * sq;
    result.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return result;
}

inline TrainResult train(const std::vector<NliExample>& corpus, const Vocabulary& vocab, const TrainConfig& cfg) {
  return train(memory_source(corpus), vocab, cfg);
}

// ---------------------------------------------------------------------------
// Prediction bound to a vocabulary

class BowClassifier {
 public:
  BowClassifier(SoftmaxModel model, Vocabulary vocab) : model_(std::move(model)), vocab_(std::move(vocab)) {
    if (model_.vocab_fingerprint != vocab_.fingerprint()) {
      throw FingerprintError("model was trained against vocabulary " + hex64(model_.vocab_fingerprint) +
                             " but vocabulary " + hex64(vocab_.fingerprint()) + " was supplied");
    }
    if (model_.dim != vocab_.dim()) throw FingerprintError("model and vocabulary dimensions differ");
  }

  Probs operator()(const NliExample& ex) const { return predict_proba(model_, featurize(ex, vocab_)); }

  const SoftmaxModel& model() const noexcept { return model_; }
  const Vocabulary& vocab() const noexcept { return vocab_; }

 private:
  SoftmaxModel model_;
  Vocabulary vocab_;
};

// ---------------------------------------------------------------------------
// Model file
//
//   #compsense-bow <TAB> 1
//   vocab_fingerprint <TAB> hex
//   dim <TAB> d
//   bias_enabled <TAB> 0|1
//   config <TAB> key=value ...
//   bias <TAB> bE <TAB> bC <TAB> bN
//   w <TAB> index <TAB> wE <TAB> wC <TAB> wN      (rows with any nonzero bit)
//   end <TAB> rows <TAB> fnv1a-of-preceding-bytes

namespace detail {

inline bool all_zero_bits(const double* row) {
  for (int c = 0; c < 3; ++c) {
    if (row[c] != 0.0 || std::signbit(row[c])) return false;
  }
  return true;
}

inline std::string config_line(const TrainConfig& c) {
  std::ostringstream s;
  s << "l2=" << format_double(c.l2) << "\tepochs=" << c.epochs << "\tbatch_size=" << c.batch_size
    << "\tlearning_rate=" << format_double(c.learning_rate) << "\tlr_decay=" << format_double(c.lr_decay)
    << "\tseed=" << c.seed << "\tbias=" << (c.bias_enabled ? 1 : 0) << "\tshuffle_buffer=" << c.shuffle_buffer;
  return s.str();
}

inline TrainConfig parse_config_fields(const std::vector<std::string_view>& cols) {
  TrainConfig c;
  for (std::size_t i = 1; i < cols.size(); ++i) {
    const auto eq = cols[i].find('=');
    if (eq == std::string_view::npos) throw DataError("malformed model config field");
    const std::string_view k = cols[i].substr(0, eq);
    const std::string_view v = cols[i].substr(eq + 1);
    if (k == "l2") c.l2 = parse_double(v);
    else if (k == "epochs") c.epochs = parse_int<int>(v);
    else if (k == "batch_size") c.batch_size = parse_int<std::size_t>(v);
    else if (k == "learning_rate") c.learning_rate = parse_double(v);
    else if (k == "lr_decay") c.lr_decay = parse_double(v);
    else if (k == "seed") c.seed = parse_int<std::uint64_t>(v);
    else if (k == "bias") c.bias_enabled = parse_int<int>(v) != 0;
    else if (k == "shuffle_buffer") c.shuffle_buffer = parse_int<std::size_t>(v);
    else throw DataError("unknown model config field '" + std::string(k) + "'");
  }
  return c;
}

}  // namespace detail

inline std::string SoftmaxModel::serialize() const {
  std::string out;
  out += std::string(kMagic) + '\t' + std::to_string(kFormatVersion) + '\n';
  out += "vocab_fingerprint\t" + hex64(vocab_fingerprint) + '\n';
  out += "dim\t" + std::to_string(dim) + '\n';
  out += "bias_enabled\t" + std::string(bias_enabled ? "1" : "0") + '\n';
  out += "config\t" + detail::config_line(config) + '\n';
  out += "bias\t" + format_double(bias[0]) + '\t' + format_double(bias[1]) + '\t' + format_double(bias[2]) + '\n';
  std::size_t rows = 0;
  for (std::size_t i = 0; i < dim; ++i) {
    const double* row = &weights[3 * i];
    if (detail::all_zero_bits(row)) continue;
    ++rows;
    out += "w\t" + std::to_string(i) + '\t' + format_double(row[0]) + '\t' + format_double(row[1]) + '\t' +
           format_double(row[2]) + '\n';
  }
  const std::uint64_t check = fnv1a64(out);
  out += "end\t" + std::to_string(rows) + '\t' + hex64(check) + '\n';
  return out;
}

inline SoftmaxModel SoftmaxModel::parse(std::string_view text) {
  const std::size_t end_pos = text.rfind("end\t");
  if (end_pos == std::string_view::npos || (end_pos > 0 && text[end_pos - 1] != '\n') || !text.ends_with('\n')) {
    throw DataError("model file truncated: missing end record");
  }
  const std::string_view body = text.substr(0, end_pos);
  auto end_cols = split_view(trim(text.substr(end_pos)), '\t');
  if (end_cols.size() != 3 || parse_hex64(end_cols[2]) != fnv1a64(body)) {
    throw DataError("model file corrupt: checksum mismatch");
  }
  const auto expected_rows = parse_int<std::size_t>(end_cols[1]);

  std::vector<std::string_view> lines = split_view(body, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.size() < 6) throw DataError("model file truncated in header");
  auto field = [&](std::size_t i, std::string_view name) {
    auto cols = split_view(lines[i], '\t');
    if (cols.empty() || cols[0] != name) {
      throw DataError("model header line " + std::to_string(i + 1) + ": expected '" + std::string(name) + "'");
    }
    return cols;
  };
  auto magic = field(0, kMagic);
  if (magic.size() != 2 || parse_int<int>(magic[1]) != kFormatVersion) {
    throw DataError("unsupported model format version");
  }
  SoftmaxModel m;
  m.vocab_fingerprint = parse_hex64(field(1, "vocab_fingerprint").at(1));
  m.dim = parse_int<std::size_t>(field(2, "dim").at(1));
  m.bias_enabled = parse_int<int>(field(3, "bias_enabled").at(1)) != 0;
  m.config = detail::parse_config_fields(field(4, "config"));
  auto b = field(5, "bias");
  if (b.size() != 4) throw DataError("malformed bias line");
  for (std::size_t c = 0; c < 3; ++c) m.bias[c] = parse_double(b[c + 1]);
  m.weights.assign(3 * m.dim, 0.0);
  std::size_t rows = 0;
  for (std::size_t li = 6; li < lines.size(); ++li) {
    auto cols = split_view(lines[li], '\t');
    if (cols.size() != 5 || cols[0] != "w") throw DataError("malformed weight line " + std::to_string(li + 1));
    const auto i = parse_int<std::size_t>(cols[1]);
    if (i >= m.dim) throw DataError("weight index out of range at line " + std::to_string(li + 1));
    for (std::size_t c = 0; c < 3; ++c) m.weights[3 * i + c] = parse_double(cols[c + 2]);
    ++rows;
  }
  if (rows != expected_rows) throw DataError("model file row count mismatch");
  for (double w : m.weights) {
    if (!std::isfinite(w)) throw DataError("model contains non-finite weights");
  }
  return m;
}

}  // namespace compsense
