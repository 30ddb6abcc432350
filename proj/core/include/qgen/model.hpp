#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qgen/config.hpp"
#include "qgen/graph.hpp"
#include "qgen/question_types.hpp"
#include "qgen/registry.hpp"
#include "qgen/subword.hpp"

namespace qgen {

struct ModelConfig {
  int vocab_size = 0;
  int embed_dim = 300;
  int hidden = 600;  // per-direction encoder size; also decoder and readout size
  int enc_layers = 2;
  bool type_module = true;
  double dropout = 0.3;

  void validate() const {
    if (vocab_size < 5) throw ConfigError("vocab_size must cover the special tokens");
    if (embed_dim <= 0 || hidden <= 0 || enc_layers <= 0) throw ConfigError("model dimensions must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
  }

  void to_kv(KvConfig& kv) const {
    kv.set("vocab_size", std::to_string(vocab_size));
    kv.set("embed_dim", std::to_string(embed_dim));
    kv.set("hidden", std::to_string(hidden));
    kv.set("enc_layers", std::to_string(enc_layers));
    kv.set("type_module", type_module ? "true" : "false");
    kv.set("dropout", std::to_string(dropout));
  }

  static ModelConfig from_kv(const KvConfig& kv) {
    ModelConfig cfg;
    cfg.vocab_size = int(kv.get_int("vocab_size", cfg.vocab_size));
    cfg.embed_dim = int(kv.get_int("embed_dim", cfg.embed_dim));
    cfg.hidden = int(kv.get_int("hidden", cfg.hidden));
    cfg.enc_layers = int(kv.get_int("enc_layers", cfg.enc_layers));
    cfg.type_module = kv.get_bool("type_module", cfg.type_module);
    cfg.dropout = kv.get_double("dropout", cfg.dropout);
    cfg.validate();
    return cfg;
  }
};

// Question generation model: stacked bidirectional LSTM encoder, bilinear
// attention, single-layer LSTM decoder with a generate/copy mixture output,
// and an optional question-type head conditioning the decoder.
template <typename T>
class Seq2SeqModel {
 public:
  struct Encoded {
    TensorPtr<T> U;       // [len x 2H], row t = [forward_t ; backward_t]
    TensorPtr<T> u_last;  // [1 x 2H], final row of U
    int len = 0;
  };

  struct DecState {
    TensorPtr<T> h;  // [1 x H]
    TensorPtr<T> c;  // [1 x H]
  };

  struct StepOut {
    TensorPtr<T> attn;    // a_t over source positions [1 x len]
    TensorPtr<T> gen;     // g_t over vocabulary [1 x V]
    TensorPtr<T> p_gen;   // scalar in (0,1)
    TensorPtr<T> gen_w;   // p_gen * g_t
    TensorPtr<T> copy;    // (1 - p_gen) * a_t
    TensorPtr<T> final;   // mixed distribution over vocabulary [1 x V]
  };

  Seq2SeqModel(const ModelConfig& cfg, Rng* init_rng) : cfg_(cfg) {
    cfg_.validate();
    const int E = cfg_.embed_dim, H = cfg_.hidden, V = cfg_.vocab_size;
    embed_ = params_.create("embed.tok", {V, E});
    for (int layer = 0; layer < cfg_.enc_layers; ++layer) {
      const int in = layer == 0 ? E : 2 * H;
      for (const char* dir : {"fw", "bw"}) {
        const std::string base = "enc.l" + std::to_string(layer) + "." + dir + ".";
        params_.create(base + "wx", {in, 4 * H});
        params_.create(base + "wh", {H, 4 * H});
        params_.create(base + "b", {4 * H});
      }
    }
    params_.create("bridge.h.w", {2 * H, H});
    params_.create("bridge.h.b", {H});
    params_.create("bridge.c.w", {2 * H, H});
    params_.create("bridge.c.b", {H});
    params_.create("dec.wx", {E, 4 * H});
    params_.create("dec.wh", {H, 4 * H});
    params_.create("dec.b", {4 * H});
    params_.create("attn.wb", {H, 2 * H});
    const int feat = cfg_.type_module ? H + 2 * H + E : H + 2 * H;
    params_.create("readout.wt", {feat, H});
    params_.create("readout.bt", {H});
    params_.create("readout.wo", {H, V});
    params_.create("readout.bo", {V});
    params_.create("pgen.w", {feat, 1});
    params_.create("pgen.b", {1});
    if (cfg_.type_module) {
      params_.create("type.mlp.w1", {2 * H, H});
      params_.create("type.mlp.b1", {H});
      params_.create("type.mlp.w2", {H, kNumQuestionTypes});
      params_.create("type.mlp.b2", {kNumQuestionTypes});
      params_.create("type.embed", {kNumQuestionTypes, E});
    }
    if (init_rng) init_parameters(*init_rng);
  }

  const ModelConfig& config() const { return cfg_; }
  ParameterRegistry<T>& params() { return params_; }
  const ParameterRegistry<T>& params() const { return params_; }

  // Uniform(-0.1, 0.1) weights, zero biases, +1 LSTM forget-gate bias.
  void init_parameters(Rng& rng) {
    const int H = cfg_.hidden;
    for (const auto& p : params_.all()) {
      const bool is_bias = p->name.size() >= 2 && (p->name.ends_with(".b") || p->name.ends_with(".b1") ||
                                                   p->name.ends_with(".b2") || p->name.ends_with(".bt") ||
                                                   p->name.ends_with(".bo"));
      if (is_bias) {
        std::fill(p->values.begin(), p->values.end(), T(0));
      } else {
        init_uniform(p, rng, -0.1, 0.1);
      }
    }
    for (const auto& p : params_.all()) {
      if (p->name.starts_with("enc.") && p->name.ends_with(".b")) {
        for (int j = H; j < 2 * H; ++j) p->values[size_t(j)] = T(1);  // forget gate
      }
    }
    auto dec_b = params_.get("dec.b");
    for (int j = H; j < 2 * H; ++j) dec_b->values[size_t(j)] = T(1);
  }

  Encoded encode(Graph<T>& g, const std::vector<int>& source_ids, bool train, Rng* rng) const {
    if (source_ids.empty()) throw std::invalid_argument("encode: empty input sequence");
    const int len = int(source_ids.size());
    const int H = cfg_.hidden;

    auto emb = g.lookup(embed_, source_ids);  // [len x E]
    std::vector<TensorPtr<T>> rows(static_cast<size_t>(len));
    for (int t = 0; t < len; ++t) rows[size_t(t)] = g.slice_rows(emb, t, t + 1);

    for (int layer = 0; layer < cfg_.enc_layers; ++layer) {
      if (layer > 0 && train) {
        for (auto& r : rows) r = g.dropout(r, cfg_.dropout, true, rng);
      }
      const std::string base = "enc.l" + std::to_string(layer) + ".";
      std::vector<TensorPtr<T>> fw(static_cast<size_t>(len)), bw(static_cast<size_t>(len));
      DecState fs = zero_state(g);
      for (int t = 0; t < len; ++t) {
        fs = lstm_step(g, base + "fw.", rows[size_t(t)], fs);
        fw[size_t(t)] = fs.h;
      }
      DecState bs = zero_state(g);
      for (int t = len - 1; t >= 0; --t) {
        bs = lstm_step(g, base + "bw.", rows[size_t(t)], bs);
        bw[size_t(t)] = bs.h;
      }
      for (int t = 0; t < len; ++t) rows[size_t(t)] = g.concat({fw[size_t(t)], bw[size_t(t)]}, 1);
    }

    Encoded enc;
    enc.len = len;
    enc.U = len == 1 ? rows[0] : g.concat(rows, 0);
    enc.u_last = rows[size_t(len - 1)];
    (void)H;
    return enc;
  }

  DecState bridge(Graph<T>& g, const TensorPtr<T>& u_last) const {
    DecState s;
    s.h = g.tanh(g.add_rowvec(g.matmul(u_last, params_.get("bridge.h.w")), params_.get("bridge.h.b")));
    s.c = g.tanh(g.add_rowvec(g.matmul(u_last, params_.get("bridge.c.w")), params_.get("bridge.c.b")));
    return s;
  }

  // Bilinear attention: scores_i = h W^b u_i, softmax, context = sum a_i u_i.
  std::pair<TensorPtr<T>, TensorPtr<T>> attend(Graph<T>& g, const TensorPtr<T>& h,
                                               const TensorPtr<T>& U) const {
    auto proj = g.matmul(h, params_.get("attn.wb"));  // [1 x 2H]
    auto scores = g.matmul_nt(proj, U);               // [1 x len]
    auto a = g.softmax(scores, 1);
    auto v = g.matmul(a, U);  // [1 x 2H]
    return {a, v};
  }

  TensorPtr<T> token_embedding(Graph<T>& g, int token_id) const { return g.lookup(embed_, {token_id}); }
  TensorPtr<T> sos_embedding(Graph<T>& g) const { return token_embedding(g, SubwordModel::kSos); }

  TensorPtr<T> predict_types(Graph<T>& g, const TensorPtr<T>& u_last) const {
    require_type_module("predict_types");
    auto hid = g.tanh(g.add_rowvec(g.matmul(u_last, params_.get("type.mlp.w1")), params_.get("type.mlp.b1")));
    auto logits = g.add_rowvec(g.matmul(hid, params_.get("type.mlp.w2")), params_.get("type.mlp.b2"));
    return g.softmax(logits, 1);
  }

  TensorPtr<T> embed_type(Graph<T>& g, int type_id) const {
    require_type_module("embed_type");
    if (type_id < 0 || type_id >= kNumQuestionTypes)
      throw std::out_of_range("type id " + std::to_string(type_id) + " outside [0,7)");
    return g.lookup(params_.get("type.embed"), {type_id});
  }

  // Descending by probability, ties to the smaller type id.
  static std::vector<int> top_k(const std::vector<T>& probs, int k) {
    if (k < 1 || k > int(probs.size()))
      throw std::invalid_argument("top_k: K=" + std::to_string(k) + " outside [1," +
                                  std::to_string(probs.size()) + "]");
    std::vector<int> ids(probs.size());
    std::iota(ids.begin(), ids.end(), 0);
    std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
      if (probs[size_t(a)] != probs[size_t(b)]) return probs[size_t(a)] > probs[size_t(b)];
      return a < b;
    });
    ids.resize(size_t(k));
    return ids;
  }

  // One decoder step. `input` is e(y_{t-1}) — or qt at t=0 in type mode, the
  // [SOS] embedding otherwise. `qt` must be present exactly when the type
  // module is configured.
  std::pair<DecState, StepOut> decode_step(Graph<T>& g, const DecState& state, const TensorPtr<T>& input,
                                           const Encoded& enc, const std::vector<int>& source_ids,
                                           const TensorPtr<T>& qt) const {
    if (bool(qt) != cfg_.type_module)
      throw std::invalid_argument(cfg_.type_module
                                      ? "decode_step: type module is configured but qt is missing"
                                      : "decode_step: qt supplied but the type module is disabled");
    if (int(source_ids.size()) != enc.len)
      throw std::invalid_argument("decode_step: source ids do not match encoder length");

    DecState next = lstm_step(g, "dec.", input, state);
    auto [a, v] = attend(g, next.h, enc.U);

    std::vector<TensorPtr<T>> feat_parts = {next.h, v};
    if (qt) feat_parts.push_back(qt);
    auto feats = g.concat(feat_parts, 1);

    auto readout = g.tanh(g.add_rowvec(g.matmul(feats, params_.get("readout.wt")), params_.get("readout.bt")));
    auto gen = g.softmax(g.add_rowvec(g.matmul(readout, params_.get("readout.wo")), params_.get("readout.bo")), 1);
    auto p_gen = g.sigmoid(g.add_rowvec(g.matmul(feats, params_.get("pgen.w")), params_.get("pgen.b")));

    StepOut out;
    out.attn = a;
    out.gen = gen;
    out.p_gen = p_gen;
    out.gen_w = g.scale_by(gen, p_gen);
    auto one_minus = g.add_scalar(g.scale(p_gen, -1.0), 1.0);
    out.copy = g.scale_by(a, one_minus);
    out.final = final_distribution(g, out.gen_w, out.copy, source_ids);
    return {next, out};
  }

  // Piecewise mixture: vocabulary entries occurring in the source gain the
  // summed copy mass of their positions.
  TensorPtr<T> final_distribution(Graph<T>& g, const TensorPtr<T>& gen_w, const TensorPtr<T>& copy,
                                  const std::vector<int>& source_ids) const {
    return g.copy_mix(gen_w, copy, source_ids);
  }

 private:
  void require_type_module(const char* what) const {
    if (!cfg_.type_module)
      throw std::logic_error(std::string(what) + " requires the type module to be configured");
  }

  DecState zero_state(Graph<T>& g) const {
    DecState s;
    s.h = g.constant({1, cfg_.hidden}, std::vector<T>(size_t(cfg_.hidden), T(0)));
    s.c = g.constant({1, cfg_.hidden}, std::vector<T>(size_t(cfg_.hidden), T(0)));
    return s;
  }

  // Gate layout along the 4H axis: input, forget, output, candidate.
  DecState lstm_step(Graph<T>& g, const std::string& prefix, const TensorPtr<T>& x,
                     const DecState& s) const {
    const int H = cfg_.hidden;
    auto gates = g.add_rowvec(
        g.add(g.matmul(x, params_.get(prefix + "wx")), g.matmul(s.h, params_.get(prefix + "wh"))),
        params_.get(prefix + "b"));
    auto i = g.sigmoid(g.slice_cols(gates, 0, H));
    auto f = g.sigmoid(g.slice_cols(gates, H, 2 * H));
    auto o = g.sigmoid(g.slice_cols(gates, 2 * H, 3 * H));
    auto cand = g.tanh(g.slice_cols(gates, 3 * H, 4 * H));
    DecState next;
    next.c = g.add(g.mul(f, s.c), g.mul(i, cand));
    next.h = g.mul(o, g.tanh(next.c));
    return next;
  }

  ModelConfig cfg_;
  ParameterRegistry<T> params_;
  TensorPtr<T> embed_;
};

}  // namespace qgen
