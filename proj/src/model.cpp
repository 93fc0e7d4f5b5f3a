#include "sabr/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "sabr/errors.hpp"

namespace sabr {

std::string to_string(ModelKind kind) { return kind == ModelKind::sabr ? "sabr" : "stabr"; }

ModelKind parse_model_kind(const std::string& name) {
  if (name == "sabr") return ModelKind::sabr;
  if (name == "stabr") return ModelKind::stabr;
  throw ArgumentError("unknown neural model kind '" + name + "'");
}

std::size_t ModelConfig::song_attention_dim() const {
  return song_att_dim != 0 ? song_att_dim : std::max<std::size_t>(1, song_state_dim() / 2);
}

std::size_t ModelConfig::tag_attention_dim() const {
  if (!uses_tags()) return 0;
  return tag_att_dim != 0 ? tag_att_dim : std::max<std::size_t>(1, tag_state_dim() / 2);
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ArgumentError(std::string("model setting '") + name + "' must be positive");
  };
  positive(num_songs, "num_songs");
  positive(song_dim, "song_dim");
  positive(song_hidden, "song_hidden");
  positive(bottleneck, "bottleneck");
  positive(history, "history");
  if (uses_tags()) {
    positive(num_tags, "num_tags");
    positive(tag_dim, "tag_dim");
    positive(tag_hidden, "tag_hidden");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ArgumentError("dropout must lie in [0, 1)");
}

ModelParams ModelParams::zeros(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  p.config = config;
  p.song_embedding = Matrix(config.song_dim, config.num_songs);
  p.song_fwd = GruParams::zeros(config.song_dim, config.song_hidden);
  p.song_bwd = GruParams::zeros(config.song_dim, config.song_hidden);
  p.song_attention = AttentionParams::zeros(config.song_state_dim(), config.song_attention_dim());
  if (config.uses_tags()) {
    p.tag_embedding = Matrix(config.tag_dim, config.num_tags);
    p.tag_fwd = GruParams::zeros(config.tag_dim, config.tag_hidden);
    p.tag_bwd = GruParams::zeros(config.tag_dim, config.tag_hidden);
    p.tag_attention = AttentionParams::zeros(config.tag_state_dim(), config.tag_attention_dim());
  }
  p.bottleneck = DenseParams::zeros(config.context_dim(), config.bottleneck);
  p.output = DenseParams::zeros(config.bottleneck, config.num_songs);
  return p;
}

ModelParams ModelParams::init(const ModelConfig& config, Rng& rng) {
  ModelParams p = zeros(config);
  // Every weight matrix draws Glorot-uniform in visit order; biases stay zero.
  ModelParams::visit(p, [&](std::string_view name, Matrix& m) {
    const bool is_bias = name.ends_with(".b") || name.ends_with(".b_z") ||
                         name.ends_with(".b_r") || name.ends_with(".b_h");
    if (!is_bias) init_glorot(m, rng);
  });
  return p;
}

ModelParams zeros_like(const ModelParams& params) { return ModelParams::zeros(params.config); }

void validate_example(const ModelConfig& config, std::span<const SongId> prefix,
                      std::span<const std::vector<TagId>> prefix_tags) {
  if (prefix.empty()) throw ArgumentError("model input prefix is empty");
  for (auto s : prefix) {
    if (s >= config.num_songs) {
      std::ostringstream msg;
      msg << "song index " << s << " out of range for vocabulary of size " << config.num_songs;
      throw VocabularyError(msg.str());
    }
  }
  if (!config.uses_tags()) return;
  if (prefix_tags.size() != prefix.size()) {
    std::ostringstream msg;
    msg << "prefix has " << prefix.size() << " songs but " << prefix_tags.size() << " tag lists";
    throw ArgumentError(msg.str());
  }
  for (const auto& tags : prefix_tags) {
    for (auto t : tags) {
      if (t >= config.num_tags) {
        std::ostringstream msg;
        msg << "tag index " << t << " out of range for vocabulary of size " << config.num_tags;
        throw VocabularyError(msg.str());
      }
    }
  }
}

ForwardResult forward(const ModelParams& params, std::span<const SongId> prefix,
                      std::span<const std::vector<TagId>> prefix_tags, Mode mode, Rng& rng) {
  const auto& cfg = params.config;
  validate_example(cfg, prefix, prefix_tags);

  ForwardResult out;
  auto& c = out.cache;
  c.prefix.assign(prefix.begin(), prefix.end());

  std::vector<Vec> song_inputs;
  song_inputs.reserve(prefix.size());
  for (auto s : prefix) song_inputs.push_back(embed_song(s, params.song_embedding));
  auto song_gru = bigru_forward(song_inputs, params.song_fwd, params.song_bwd);
  auto song_att = attention_forward(song_gru.states, params.song_attention);
  c.song_gru = std::move(song_gru.cache);
  out.song_weights = song_att.weights;
  c.song_attention = std::move(song_att.cache);

  Vec context = std::move(song_att.context);
  if (cfg.uses_tags()) {
    c.prefix_tags.assign(prefix_tags.begin(), prefix_tags.end());
    std::vector<Vec> tag_inputs;
    tag_inputs.reserve(prefix.size());
    for (const auto& tags : prefix_tags) tag_inputs.push_back(embed_tags_avg(tags, params.tag_embedding));
    auto tag_gru = bigru_forward(tag_inputs, params.tag_fwd, params.tag_bwd);
    auto tag_att = attention_forward(tag_gru.states, params.tag_attention);
    c.tag_gru = std::move(tag_gru.cache);
    out.tag_weights = tag_att.weights;
    c.tag_attention = std::move(tag_att.cache);
    context.insert(context.end(), tag_att.context.begin(), tag_att.context.end());
  }

  auto hidden = dense_forward(context, params.bottleneck.w, params.bottleneck.b, Activation::relu);
  c.bottleneck = std::move(hidden.cache);
  auto hidden_drop = dropout_forward(hidden.y, cfg.dropout, mode, rng);
  c.bottleneck_mask = std::move(hidden_drop.mask);

  auto logits = dense_forward(hidden_drop.y, params.output.w, params.output.b, Activation::none);
  c.output = std::move(logits.cache);
  auto logits_drop = dropout_forward(logits.y, cfg.dropout, mode, rng);
  c.output_mask = std::move(logits_drop.mask);

  c.log_probs = log_softmax(logits_drop.y);
  out.log_probs = c.log_probs;
  return out;
}

ForwardResult forward(const ModelParams& params, const TrainingExample& ex, Mode mode, Rng& rng) {
  return forward(params, ex.prefix, ex.prefix_tags, mode, rng);
}

Real loss(std::span<const Real> log_probs, SongId target) {
  if (target >= log_probs.size()) {
    std::ostringstream msg;
    msg << "target " << target << " out of range for " << log_probs.size() << " outputs";
    throw VocabularyError(msg.str());
  }
  // Clamp the -0.0 produced when the target holds all the mass.
  return std::max(0.0, -log_probs[target]);
}

void backward_into(const ModelParams& params, const ForwardCache& c, SongId target,
                   Gradients& grads) {
  const auto& cfg = params.config;
  if (target >= cfg.num_songs) {
    std::ostringstream msg;
    msg << "target " << target << " out of range for vocabulary of size " << cfg.num_songs;
    throw VocabularyError(msg.str());
  }

  // d(-log p_target)/d logits = softmax - one_hot
  Vec d_logits(c.log_probs.size());
  for (std::size_t i = 0; i < d_logits.size(); ++i) d_logits[i] = std::exp(c.log_probs[i]);
  d_logits[target] -= 1.0;

  Vec d_out = dropout_backward(c.output_mask, d_logits);
  Vec d_hidden_drop = dense_backward(params.output.w, c.output, d_out, grads.output.w, grads.output.b);
  Vec d_hidden = dropout_backward(c.bottleneck_mask, d_hidden_drop);
  Vec d_context = dense_backward(params.bottleneck.w, c.bottleneck, d_hidden, grads.bottleneck.w,
                                 grads.bottleneck.b);

  const auto song_state = cfg.song_state_dim();
  std::span<const Real> d_song_ctx(d_context.data(), song_state);
  auto d_song_states = attention_backward(params.song_attention, c.song_attention, d_song_ctx,
                                          grads.song_attention);
  auto d_song_inputs = bigru_backward(params.song_fwd, params.song_bwd, c.song_gru, d_song_states,
                                      grads.song_fwd, grads.song_bwd);
  for (std::size_t j = 0; j < c.prefix.size(); ++j) {
    embed_song_backward(c.prefix[j], d_song_inputs[j], grads.song_embedding);
  }

  if (cfg.uses_tags()) {
    std::span<const Real> d_tag_ctx(d_context.data() + song_state, cfg.tag_state_dim());
    auto d_tag_states = attention_backward(params.tag_attention, c.tag_attention, d_tag_ctx,
                                           grads.tag_attention);
    auto d_tag_inputs = bigru_backward(params.tag_fwd, params.tag_bwd, c.tag_gru, d_tag_states,
                                       grads.tag_fwd, grads.tag_bwd);
    for (std::size_t j = 0; j < c.prefix_tags.size(); ++j) {
      embed_tags_avg_backward(c.prefix_tags[j], d_tag_inputs[j], grads.tag_embedding);
    }
  }
}

Gradients backward(const ModelParams& params, const ForwardCache& cache, SongId target) {
  Gradients grads = zeros_like(params);
  backward_into(params, cache, target, grads);
  return grads;
}

Real example_gradient(const ModelParams& params, const TrainingExample& ex, Rng& rng,
                      Gradients& grads) {
  auto result = forward(params, ex, Mode::train, rng);
  backward_into(params, result.cache, ex.target, grads);
  return loss(result.log_probs, ex.target);
}

std::vector<SongId> top_k_indices(std::span<const Real> scores, std::size_t k) {
  if (k < 1 || k > scores.size()) {
    std::ostringstream msg;
    msg << "k = " << k << " must lie in [1, " << scores.size() << "]";
    throw ArgumentError(msg.str());
  }
  std::vector<SongId> order(scores.size());
  std::iota(order.begin(), order.end(), SongId{0});
  auto better = [&](SongId a, SongId b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    better);
  order.resize(k);
  return order;
}

std::vector<SongId> predict_topk(const ModelParams& params, std::span<const SongId> prefix,
                                 std::span<const std::vector<TagId>> prefix_tags, std::size_t k) {
  const auto window = std::min(prefix.size(), params.config.history);
  const auto skip = prefix.size() - window;
  auto recent = prefix.subspan(skip);
  auto recent_tags = params.config.uses_tags() && prefix_tags.size() == prefix.size()
                         ? prefix_tags.subspan(skip)
                         : prefix_tags;
  if (k < 1 || k > params.config.num_songs) {
    std::ostringstream msg;
    msg << "k = " << k << " must lie in [1, " << params.config.num_songs << "]";
    throw ArgumentError(msg.str());
  }
  Rng unused(0);  // eval mode draws nothing
  auto result = forward(params, recent, recent_tags, Mode::eval, unused);
  return top_k_indices(result.log_probs, k);
}

}  // namespace sabr
