#include "fraudfuse/fusion.hpp"

#include <algorithm>

#include "fraudfuse/errors.hpp"
#include "fraudfuse/numcore/ops.hpp"
#include "fraudfuse/numcore/optim.hpp"

namespace fraudfuse::fusion {

using nc::Tensor;

Tensor GatingNetwork::logits(const Tensor& x) const {
    return nc::add(nc::matmul(nc::relu(nc::add(nc::matmul(x, w1), b1)), w2), b2);
}

Tensor Affine::apply(const Tensor& x) const { return nc::add(nc::matmul(x, w), b); }

Tensor gcn_enhanced(const Tensor& node_vecs, const Tensor& pooled_embeds, const Affine& proj) {
    if (node_vecs.rows() != pooled_embeds.rows()) {
        throw ShapeError("gcn_enhanced: node vectors " + node_vecs.shape_str() + " vs pooled embeddings " +
                         pooled_embeds.shape_str());
    }
    return proj.apply(nc::concat({node_vecs, pooled_embeds}, 1));
}

GateOutput gate_from_logits(const Tensor& logits, double tau, bool hard, const Tensor& noise) {
    if (!(tau > 0.0)) throw ConfigError("gate temperature must be > 0");
    if (logits.cols() != kStrategies) throw ShapeError("gate: expected 3 logits per row, got " + logits.shape_str());
    Tensor z = noise.defined() ? nc::add(logits, noise) : logits;
    GateOutput out;
    out.soft = nc::softmax(nc::scale(z, 1.0 / tau), 1);
    if (!hard) {
        out.g = out.soft;
        return out;
    }
    out.g = nc::straight_through_onehot(out.soft);
    for (std::size_t r = 0; r < out.g.rows(); ++r) {
        for (std::size_t c = 0; c < kStrategies; ++c) {
            if (out.g.at(r, c) == 1.0) out.selected.push_back(static_cast<int>(c));
        }
    }
    return out;
}

GateOutput gate_weights(const Tensor& bert_pooled, const Tensor& gcn_enh, const GatingNetwork& net, double tau, bool hard,
                        const Tensor& noise) {
    return gate_from_logits(net.logits(nc::concat({bert_pooled, gcn_enh}, 1)), tau, hard, noise);
}

Tensor dynamic_fuse(const Tensor& token_embeds, const Tensor& gcn_enh, const Tensor& g, const Tensor& alpha) {
    if (g.cols() != kStrategies) throw ShapeError("dynamic_fuse: gate must have 3 columns, got " + g.shape_str());
    if (alpha.size() != 1) throw ShapeError("dynamic_fuse: alpha must be 1x1, got " + alpha.shape_str());
    if (gcn_enh.cols() != token_embeds.cols()) {
        throw ShapeError("dynamic_fuse: token embeddings " + token_embeds.shape_str() + " vs graph vector " +
                         gcn_enh.shape_str());
    }
    const Tensor a = nc::clamp(alpha, 0.0, 1.0);
    const Tensor one_minus_a = nc::sub(Tensor::full(1, 1, 1.0), a);
    const Tensor g1 = nc::slice_cols(g, 0, 1);
    const Tensor g2 = nc::slice_cols(g, 1, 1);
    const Tensor g3 = nc::slice_cols(g, 2, 1);
    const Tensor blend = nc::add(nc::mul(a, token_embeds), nc::mul(one_minus_a, gcn_enh));
    return nc::add(nc::add(nc::mul(g1, token_embeds), nc::mul(g2, gcn_enh)), nc::mul(g3, blend));
}

Tensor classify(const Tensor& h, const Tensor& w, const Tensor& b) {
    if (w.cols() != 2) throw ShapeError("classify: expected 2 output classes, got " + w.shape_str());
    return nc::softmax(nc::add(nc::matmul(h, w), b), 1);
}

Tensor ModelOutput::fraud_prob() const { return nc::slice_cols(probs, 1, 1); }

void ModelConfig::validate() const {
    encoder.validate();
    gcn.validate();
    if (gcn.d_in != graphnet::kFeatureDim) {
        throw ConfigError("gcn input width must be " + std::to_string(graphnet::kFeatureDim));
    }
    if (d_gate == 0) throw ConfigError("d_gate must be positive");
    if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
    if (gate_lock && (*gate_lock < 0 || *gate_lock >= static_cast<int>(kStrategies))) {
        throw ConfigError("gate lock must be strategy 1, 2 or 3");
    }
}

nlohmann::json ModelConfig::to_json() const {
    nlohmann::json j;
    j["encoder"] = {{"vocab_size", encoder.vocab_size}, {"type_vocab", encoder.type_vocab},
                    {"d_model", encoder.d_model},       {"n_layers", encoder.n_layers},
                    {"n_heads", encoder.n_heads},       {"d_ff", encoder.d_ff},
                    {"max_len", encoder.max_len},       {"dropout", encoder.dropout}};
    j["gcn"] = {{"d_in", gcn.d_in},         {"d_hidden", gcn.d_hidden},   {"d_out", gcn.d_out},
                {"n_layers", gcn.n_layers}, {"final_relu", gcn.final_relu}};
    j["d_gate"] = d_gate;
    j["tau"] = tau;
    j["hard"] = hard;
    j["tau_anneal"] = tau_anneal;
    j["train_noise"] = train_noise == NoiseMode::Sampled ? "sampled" : "none";
    j["gate_lock"] = gate_lock ? nlohmann::json(*gate_lock + 1) : nlohmann::json(nullptr);
    j["init_seed"] = init_seed;
    return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    try {
        ModelConfig c;
        const auto& e = j.at("encoder");
        c.encoder.vocab_size = e.at("vocab_size");
        c.encoder.type_vocab = e.at("type_vocab");
        c.encoder.d_model = e.at("d_model");
        c.encoder.n_layers = e.at("n_layers");
        c.encoder.n_heads = e.at("n_heads");
        c.encoder.d_ff = e.at("d_ff");
        c.encoder.max_len = e.at("max_len");
        c.encoder.dropout = e.at("dropout");
        const auto& g = j.at("gcn");
        c.gcn.d_in = g.at("d_in");
        c.gcn.d_hidden = g.at("d_hidden");
        c.gcn.d_out = g.at("d_out");
        c.gcn.n_layers = g.at("n_layers");
        c.gcn.final_relu = g.at("final_relu");
        c.d_gate = j.at("d_gate");
        c.tau = j.at("tau");
        c.hard = j.at("hard");
        c.tau_anneal = j.at("tau_anneal");
        c.train_noise = j.at("train_noise") == "sampled" ? NoiseMode::Sampled : NoiseMode::None;
        if (!j.at("gate_lock").is_null()) c.gate_lock = j.at("gate_lock").get<int>() - 1;
        c.init_seed = j.at("init_seed");
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& ex) {
        throw DataError(std::string("bad model config: ") + ex.what());
    }
}

FraudModel::FraudModel(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    nc::Rng root(cfg_.init_seed, "init");
    nc::Rng enc_rng = root.fork("encoder");
    nc::Rng gcn_rng = root.fork("gcn");
    nc::Rng head_rng = root.fork("heads");
    const std::size_t d = cfg_.encoder.d_model;

    encoder_ = std::make_unique<encoder::Encoder>(cfg_.encoder, store_, enc_rng);
    gcn_ = std::make_unique<graphnet::GcnStack>(cfg_.gcn, store_, gcn_rng);

    auto weight = [&](const std::string& name, std::size_t r, std::size_t c) {
        Tensor& t = store_.add(name, r, c);
        nc::xavier_uniform(t, head_rng);
        return t;
    };
    proj_.w = weight("fusion.proj.w", cfg_.gcn.d_out + d, d);
    proj_.b = store_.add("fusion.proj.b", 1, d);
    gate_net_.w1 = weight("gate.w1", 2 * d, cfg_.d_gate);
    gate_net_.b1 = store_.add("gate.b1", 1, cfg_.d_gate);
    gate_net_.w2 = weight("gate.w2", cfg_.d_gate, kStrategies);
    gate_net_.b2 = store_.add("gate.b2", 1, kStrategies);
    alpha_ = store_.add("fusion.alpha", 1, 1);
    alpha_.mutable_data()[0] = 0.5;
    classifier_.w = weight("classifier.w", d, 2);
    classifier_.b = store_.add("classifier.b", 1, 2);
}

ModelOutput FraudModel::forward(const ForwardRequest& req, const GraphInputs& graph) const {
    if (req.seqs.empty()) throw DataError("model forward: empty batch");
    if (req.node_rows.size() != req.seqs.size()) {
        throw ShapeError("model forward: " + std::to_string(req.seqs.size()) + " sequences but " +
                         std::to_string(req.node_rows.size()) + " graph rows");
    }
    const bool train = req.mode == Mode::Train;
    const bool needs_noise = cfg_.train_noise == NoiseMode::Sampled && !req.fixed_noise.defined() && !cfg_.gate_lock;
    const bool needs_dropout = !req.no_dropout && cfg_.encoder.dropout > 0.0;
    if (train && !req.rng && (needs_noise || needs_dropout)) {
        throw ConfigError("training forward needs a random generator");
    }
    const auto batch = encoder::SequenceBatch::from(req.seqs);
    const std::size_t B = batch.batch;

    const Tensor embeds = encoder_->embed(batch);
    const Tensor pooled = encoder::pool_mean(embeds, batch);
    const Tensor node_vecs = gcn_->forward_rows(graph.h0, graph.a_hat, req.node_rows);
    const Tensor enhanced = gcn_enhanced(node_vecs, pooled, proj_);

    ModelOutput out;
    if (cfg_.gate_lock) {
        std::vector<double> onehot(B * kStrategies, 0.0);
        for (std::size_t b = 0; b < B; ++b) onehot[b * kStrategies + static_cast<std::size_t>(*cfg_.gate_lock)] = 1.0;
        out.gate.g = Tensor::from(B, kStrategies, onehot);
        out.gate.soft = out.gate.g;
        out.gate.selected.assign(B, *cfg_.gate_lock);
    } else {
        Tensor noise = req.fixed_noise;
        if (!noise.defined() && train && cfg_.train_noise == NoiseMode::Sampled) {
            std::vector<double> b(B * kStrategies);
            for (double& v : b) v = req.rng->gumbel();
            noise = Tensor::from(B, kStrategies, std::move(b));
        }
        const double tau = req.tau_override > 0.0 ? req.tau_override : cfg_.tau;
        out.gate = gate_weights(pooled, enhanced, gate_net_, tau, cfg_.hard, noise);
    }

    std::vector<std::size_t> row_owner(B * batch.length);
    for (std::size_t i = 0; i < row_owner.size(); ++i) row_owner[i] = i / batch.length;
    const Tensor fused = dynamic_fuse(embeds, nc::embedding_lookup(enhanced, row_owner),
                                      nc::embedding_lookup(out.gate.g, row_owner), alpha_);

    encoder::ForwardOptions opts;
    opts.train = train && !req.no_dropout;
    opts.dropout_rng = req.rng;
    const Tensor h = encoder_->forward(fused, batch, opts);
    out.probs = classify(encoder::pool_cls(h, batch), classifier_.w, classifier_.b);
    return out;
}

Tensor text_only_forward(const FraudModel& model, const std::vector<const corpus::TokenSequence*>& seqs) {
    const auto batch = encoder::SequenceBatch::from(seqs);
    const Tensor h = model.text_encoder().forward(model.text_encoder().embed(batch), batch);
    return classify(encoder::pool_cls(h, batch), model.classifier().w, model.classifier().b);
}

}  // namespace fraudfuse::fusion
