// SPDX-License-Identifier: Apache-2.0
#include "epgat/model.hpp"

#include "epgat/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace epgat::model {

void ModelConfig::validate() const {
  if (lag_window < 1) throw ConfigError("lag window must be at least 1");
  if (!(scaling > 0.0)) throw ConfigError("scaling factor k must be positive");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold s must lie in [0, 1]");
  if (indicators < 1 || indicators > 5) throw ConfigError("indicator count must be in [1, 5]");
  if (forecast_steps < 1) throw ConfigError("forecast steps must be positive");
  if (trend_classes != 2) throw ConfigError("only two trend classes are supported");
  if (hidden < 1) throw ConfigError("hidden width must be positive");
  if (blocks < 1) throw ConfigError("block count must be positive");
  if (parallel_attention && (heads < 1 || (2 * hidden) % heads != 0)) {
    throw ConfigError("heads (" + std::to_string(heads) + ") must divide the fused width " +
                      std::to_string(2 * hidden));
  }
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
  if (epochs < 1) throw ConfigError("epochs must be positive");
  if (grad_clip < 0.0) throw ConfigError("grad_clip must be non-negative");
}

ModelParams init_model(const ModelConfig& config) {
  config.validate();
  const Index d = config.hidden;
  ModelParams params;
  auto in_rng = make_rng(config.seed, 0);
  params.w_in = glorot_uniform(config.input_width(), d, in_rng);
  params.input_slopes = Matrix::Constant(1, d, gnn::kInitialPreluSlope);
  for (int l = 0; l < config.blocks; ++l) {
    params.blocks.push_back(gnn::init_block(d, config.heads, config.seed, config.parallel_attention,
                                            static_cast<std::uint64_t>(l) + 1));
  }
  auto out_rng = make_rng(config.seed, 1u << 20);
  params.w_out = glorot_uniform(d, config.output_width(), out_rng);
  return params;
}

std::size_t parameter_count(const ModelParams& params) {
  std::size_t n = 0;
  visit_model([&](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); },
              params);
  return n;
}

ModelVars bind(ad::Tape& tape, const ModelParams& params) {
  ModelVars vars;
  visit_model([&](const std::string&, const Matrix& m, ad::Value& v) { v = tape.variable(m); }, params,
              vars);
  return vars;
}

ad::Value forward(const ModelVars& vars, const graph::GraphSnapshot& sample,
                  const ModelConfig& config) {
  if (sample.features.cols() != vars.w_in.rows()) {
    throw ShapeError("forward: features " + shape_string(sample.features) + " vs input projection " +
                     shape_string(vars.w_in.data()));
  }
  if (sample.adjacency.rows() != sample.features.rows() ||
      sample.adjacency.cols() != sample.features.rows()) {
    throw ShapeError("forward: adjacency " + shape_string(sample.adjacency) + " for " +
                     std::to_string(sample.features.rows()) + " stocks");
  }
  auto& tape = vars.w_in.tape();
  const ad::Value x = tape.constant(sample.features);
  const ad::Value h0 = ad::prelu(ad::matmul(x, vars.w_in), vars.input_slopes);
  gnn::BlockState state{h0, h0};
  for (const auto& block : vars.blocks) {
    state = gnn::parallel_block(state, sample.adjacency, block);
  }
  const ad::Value logits = ad::matmul(state.parallel, vars.w_out);
  if (logits.cols() != config.output_width()) {
    throw ShapeError("forward: logits " + shape_string(logits.data()) + " vs configured width " +
                     std::to_string(config.output_width()));
  }
  return logits;
}

Matrix forward(const ModelParams& params, const graph::GraphSnapshot& sample,
               const ModelConfig& config) {
  ad::Tape tape;
  return forward(bind(tape, params), sample, config).data();
}

ad::Value loss(const ad::Value& logits, const LabelMatrix& labels, const ModelConfig& config) {
  return ad::cross_entropy_with_logits(logits, labels, config.trend_classes);
}

Prediction predict(const Matrix& logits, int trend_classes) {
  const Index classes = trend_classes;
  if (classes < 1 || logits.cols() % classes != 0) {
    throw ShapeError("predict: " + std::to_string(logits.cols()) +
                     " logit columns not divisible by " + std::to_string(classes));
  }
  const Index steps = logits.cols() / classes;
  Prediction out;
  out.classes.resize(logits.rows(), steps);
  out.probabilities.resize(logits.rows(), logits.cols());
  for (Index b = 0; b < steps; ++b) {
    const Matrix block = logits.middleCols(b * classes, classes);
    out.probabilities.middleCols(b * classes, classes) = ad::softmax_rows(block);
    for (Index i = 0; i < logits.rows(); ++i) {
      Index best = 0;
      for (Index c = 1; c < classes; ++c) {
        if (block(i, c) > block(i, best)) best = c;
      }
      out.classes(i, b) = static_cast<int>(best);
    }
  }
  return out;
}

Prediction predict(const ModelParams& params, const graph::GraphSnapshot& sample,
                   const ModelConfig& config) {
  return predict(forward(params, sample, config), config.trend_classes);
}

namespace {

constexpr unsigned char kMagic[4] = {'E', 'P', 'G', 'T'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    out_.insert(out_.end(), c, c + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  std::vector<unsigned char> take() { return std::move(out_); }

 private:
  std::vector<unsigned char> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& in) : in_(in) {}

  void need(std::size_t n, const char* what) const {
    if (in_.size() - pos_ < n) {
      throw FormatError(std::string("truncated checkpoint while reading ") + what, pos_);
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return in_[pos_++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }
  const unsigned char* at() const { return in_.data() + pos_; }

 private:
  const std::vector<unsigned char>& in_;
  std::size_t pos_ = 0;
};

void write_config(Writer& w, const ModelConfig& c) {
  w.u32(static_cast<std::uint32_t>(c.lag_window));
  w.f64(c.scaling);
  w.f64(c.threshold);
  w.u32(static_cast<std::uint32_t>(c.indicators));
  w.u32(static_cast<std::uint32_t>(c.forecast_steps));
  w.u32(static_cast<std::uint32_t>(c.trend_classes));
  w.u32(static_cast<std::uint32_t>(c.hidden));
  w.u32(static_cast<std::uint32_t>(c.heads));
  w.u32(static_cast<std::uint32_t>(c.blocks));
  w.f64(c.learning_rate);
  w.f64(c.weight_decay);
  w.u32(static_cast<std::uint32_t>(c.epochs));
  w.u64(c.seed);
  w.u8(c.parallel_attention ? 1 : 0);
  w.u8(static_cast<std::uint8_t>(c.graph));
  w.f64(c.grad_clip);
}

ModelConfig read_config(Reader& r) {
  ModelConfig c;
  c.lag_window = static_cast<int>(r.u32("lag_window"));
  c.scaling = r.f64("scaling");
  c.threshold = r.f64("threshold");
  c.indicators = static_cast<int>(r.u32("indicators"));
  c.forecast_steps = static_cast<int>(r.u32("forecast_steps"));
  c.trend_classes = static_cast<int>(r.u32("trend_classes"));
  c.hidden = static_cast<int>(r.u32("hidden"));
  c.heads = static_cast<int>(r.u32("heads"));
  c.blocks = static_cast<int>(r.u32("blocks"));
  c.learning_rate = r.f64("learning_rate");
  c.weight_decay = r.f64("weight_decay");
  c.epochs = static_cast<int>(r.u32("epochs"));
  c.seed = r.u64("seed");
  const auto parallel_at = r.pos();
  const auto parallel = r.u8("parallel_attention");
  if (parallel > 1) throw FormatError("invalid parallel_attention flag", parallel_at);
  c.parallel_attention = parallel == 1;
  const auto graph_at = r.pos();
  const auto source = r.u8("graph_source");
  if (source > 1) throw FormatError("invalid graph source", graph_at);
  c.graph = static_cast<GraphSource>(source);
  c.grad_clip = r.f64("grad_clip");
  return c;
}

}  // namespace

std::vector<unsigned char> encode_checkpoint(const ModelParams& params, const ModelConfig& config) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  write_config(w, config);
  std::uint32_t count = 0;
  visit_model([&](const std::string&, const Matrix&) { ++count; }, params);
  w.u32(count);
  visit_model(
      [&](const std::string&, const Matrix& m) {
        w.u32(static_cast<std::uint32_t>(m.rows()));
        w.u32(static_cast<std::uint32_t>(m.cols()));
        for (Index i = 0; i < m.size(); ++i) w.f64(m.data()[i]);
      },
      params);
  return w.take();
}

Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes) {
  Reader r(bytes);
  r.need(sizeof kMagic, "magic");
  if (std::memcmp(r.at(), kMagic, sizeof kMagic) != 0) throw FormatError("bad magic", 0);
  for (std::size_t i = 0; i < sizeof kMagic; ++i) r.u8("magic");
  const auto version_at = r.pos();
  const auto version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version), version_at);
  }
  const auto config_at = r.pos();
  Checkpoint ck;
  ck.config = read_config(r);
  try {
    ck.config.validate();
    ck.params = init_model(ck.config);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid config block: ") + e.what(), config_at);
  }
  const auto count_at = r.pos();
  const auto count = r.u32("tensor count");
  std::uint32_t expected = 0;
  visit_model([&](const std::string&, const Matrix&) { ++expected; }, ck.params);
  if (count != expected) {
    throw FormatError("tensor count " + std::to_string(count) + " does not match config (" +
                          std::to_string(expected) + ")",
                      count_at);
  }
  visit_model(
      [&](const std::string& name, Matrix& m) {
        const auto shape_at = r.pos();
        const auto rows = r.u32("tensor rows");
        const auto cols = r.u32("tensor cols");
        if (rows != m.rows() || cols != m.cols()) {
          throw FormatError("tensor " + name + " has shape " + shape_string(rows, cols) +
                                ", expected " + shape_string(m),
                            shape_at);
        }
        for (Index i = 0; i < m.size(); ++i) m.data()[i] = r.f64(name.c_str());
      },
      ck.params);
  if (r.remaining() != 0) throw FormatError("trailing bytes after last tensor", r.pos());
  return ck;
}

void save_model(const ModelParams& params, const ModelConfig& config,
                const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(params, config);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed for " + path.string());
}

Checkpoint load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read checkpoint " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace epgat::model
