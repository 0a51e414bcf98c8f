#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fraudfuse/corpusgen.hpp"
#include "fraudfuse/encoder.hpp"
#include "fraudfuse/graphnet.hpp"
#include "fraudfuse/numcore/random.hpp"
#include "fraudfuse/numcore/tensor.hpp"

namespace fraudfuse::fusion {

inline constexpr std::size_t kStrategies = 3;

struct GatingNetwork {
    nc::Tensor w1, b1;  // 2d x d_gate, 1 x d_gate
    nc::Tensor w2, b2;  // d_gate x 3, 1 x 3

    // B x 2d -> B x 3 logits.
    nc::Tensor logits(const nc::Tensor& x) const;
};

struct Affine {
    nc::Tensor w, b;
    nc::Tensor apply(const nc::Tensor& x) const;
};

struct GateOutput {
    nc::Tensor g;                  // B x 3, rows on the simplex (one-hot when hard)
    nc::Tensor soft;               // B x 3 relaxed weights before any hard selection
    std::vector<int> selected;     // argmax per row when hard, else empty
};

// proj(concat(node_vec, pooled_embeds)): B x d_out and B x d_model -> B x d_model.
nc::Tensor gcn_enhanced(const nc::Tensor& node_vecs, const nc::Tensor& pooled_embeds, const Affine& proj);

// g = softmax((logits + noise) / tau) over the three strategies, or its
// straight-through one-hot when hard. `noise` is B x 3 or undefined (b = 0).
GateOutput gate_from_logits(const nc::Tensor& logits, double tau, bool hard, const nc::Tensor& noise = {});
GateOutput gate_weights(const nc::Tensor& bert_pooled, const nc::Tensor& gcn_enhanced, const GatingNetwork& net,
                        double tau, bool hard, const nc::Tensor& noise = {});

// fused = g1 E + g2 G + g3 (a E + (1 - a) G), a = clamp(alpha, 0, 1).
// E is R x d; G is R x d or 1 x d; g is R x 3 or 1 x 3; alpha is 1 x 1.
nc::Tensor dynamic_fuse(const nc::Tensor& token_embeds, const nc::Tensor& gcn_enh, const nc::Tensor& g,
                        const nc::Tensor& alpha);

// softmax(h W + b) over two classes; column 1 is the fraud probability.
nc::Tensor classify(const nc::Tensor& h, const nc::Tensor& w, const nc::Tensor& b);

// Gumbel noise handling for the gate during training.
enum class NoiseMode { None, Sampled };

struct ModelConfig {
    encoder::EncoderConfig encoder;
    graphnet::GcnConfig gcn;
    std::size_t d_gate = 32;
    double tau = 1.0;
    bool hard = false;
    bool tau_anneal = false;
    NoiseMode train_noise = NoiseMode::Sampled;
    // 0-based strategy forced for every account; no gating when set.
    std::optional<int> gate_lock;
    std::uint64_t init_seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
};

struct GraphInputs {
    nc::Tensor a_hat;  // n x n constant
    nc::Tensor h0;     // n x d_in constant
};

enum class Mode { Train, Eval };

struct ForwardRequest {
    std::vector<const corpus::TokenSequence*> seqs;
    std::vector<std::size_t> node_rows;  // graph row of each account
    Mode mode = Mode::Eval;
    nc::Rng* rng = nullptr;  // noise and dropout in Train mode
    // Overrides sampled noise (B x 3); used for gradient checks.
    nc::Tensor fixed_noise;
    // Disables dropout even in Train mode.
    bool no_dropout = false;
    double tau_override = 0.0;
};

struct ModelOutput {
    nc::Tensor probs;  // B x 2
    GateOutput gate;
    nc::Tensor fraud_prob() const;  // B x 1
};

class FraudModel {
public:
    explicit FraudModel(const ModelConfig& cfg);
    FraudModel(const FraudModel&) = delete;
    FraudModel& operator=(const FraudModel&) = delete;

    ModelOutput forward(const ForwardRequest& req, const GraphInputs& graph) const;

    const ModelConfig& config() const { return cfg_; }
    ModelConfig& mutable_config() { return cfg_; }
    nc::ParameterStore& params() { return store_; }
    const nc::ParameterStore& params() const { return store_; }
    const encoder::Encoder& text_encoder() const { return *encoder_; }
    const graphnet::GcnStack& gcn() const { return *gcn_; }
    const GatingNetwork& gating() const { return gate_net_; }
    const Affine& projection() const { return proj_; }
    const nc::Tensor& alpha() const { return alpha_; }
    const Affine& classifier() const { return classifier_; }

private:
    ModelConfig cfg_;
    nc::ParameterStore store_;
    std::unique_ptr<encoder::Encoder> encoder_;
    std::unique_ptr<graphnet::GcnStack> gcn_;
    GatingNetwork gate_net_;
    Affine proj_;
    nc::Tensor alpha_;
    Affine classifier_;
};

// Text-only reference path: embed -> encoder -> CLS -> classify, with no
// fusion at all. Shares the model's parameters.
nc::Tensor text_only_forward(const FraudModel& model, const std::vector<const corpus::TokenSequence*>& seqs);

}  // namespace fraudfuse::fusion
