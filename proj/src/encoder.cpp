#include "fraudfuse/encoder.hpp"

#include <cmath>

#include "fraudfuse/errors.hpp"
#include "fraudfuse/numcore/ops.hpp"
#include "fraudfuse/numcore/optim.hpp"

namespace fraudfuse::encoder {

using nc::Tensor;

namespace {

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) { return nc::add(nc::matmul(x, w), b); }

Tensor maybe_dropout(const Tensor& x, const EncoderConfig& cfg, const ForwardOptions& opts) {
    if (!opts.train || cfg.dropout <= 0.0) return x;
    if (!opts.dropout_rng) throw ConfigError("encoder: training forward needs a dropout generator");
    return nc::dropout(x, cfg.dropout, *opts.dropout_rng);
}

Tensor normal_init(nc::ParameterStore& store, const std::string& name, std::size_t r, std::size_t c, nc::Rng& rng) {
    Tensor& t = store.add(name, r, c);
    for (double& v : t.mutable_data()) v = 0.02 * rng.normal();
    return t;
}

Tensor xavier_init(nc::ParameterStore& store, const std::string& name, std::size_t r, std::size_t c, nc::Rng& rng) {
    Tensor& t = store.add(name, r, c);
    nc::xavier_uniform(t, rng);
    return t;
}

Tensor ones_init(nc::ParameterStore& store, const std::string& name, std::size_t c) {
    Tensor& t = store.add(name, 1, c);
    for (double& v : t.mutable_data()) v = 1.0;
    return t;
}

Tensor self_attention(const Tensor& x, const SequenceBatch& batch, const EncoderLayer& layer,
                      const EncoderConfig& cfg, const ForwardOptions& opts) {
    const Tensor q = linear(x, layer.wq, layer.bq);
    const Tensor k = linear(x, layer.wk, layer.bk);
    const Tensor v = linear(x, layer.wv, layer.bv);
    const std::size_t len = batch.length;
    const std::size_t dh = cfg.d_model / cfg.n_heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

    std::vector<Tensor> per_seq;
    per_seq.reserve(batch.batch);
    for (std::size_t b = 0; b < batch.batch; ++b) {
        const Tensor qb = nc::slice_rows(q, b * len, len);
        const Tensor kb = nc::slice_rows(k, b * len, len);
        const Tensor vb = nc::slice_rows(v, b * len, len);
        std::vector<Tensor> heads;
        heads.reserve(cfg.n_heads);
        for (std::size_t h = 0; h < cfg.n_heads; ++h) {
            const Tensor qh = cfg.n_heads == 1 ? qb : nc::slice_cols(qb, h * dh, dh);
            const Tensor kh = cfg.n_heads == 1 ? kb : nc::slice_cols(kb, h * dh, dh);
            const Tensor vh = cfg.n_heads == 1 ? vb : nc::slice_cols(vb, h * dh, dh);
            const Tensor attn = nc::masked_softmax(nc::scale(nc::matmul_nt(qh, kh), inv_sqrt), batch.masks[b]);
            if (opts.attention_out) opts.attention_out->push_back(attn);
            heads.push_back(nc::matmul(attn, vh));
        }
        per_seq.push_back(cfg.n_heads == 1 ? heads[0] : nc::concat(heads, 1));
    }
    const Tensor ctx = batch.batch == 1 ? per_seq[0] : nc::concat(per_seq, 0);
    return linear(ctx, layer.wo, layer.bo);
}

}  // namespace

void EncoderConfig::validate() const {
    if (d_model == 0 || n_layers == 0 || n_heads == 0 || d_ff == 0 || max_len < 2 || vocab_size == 0) {
        throw ConfigError("encoder sizes must be positive (max_len >= 2)");
    }
    if (d_model % n_heads != 0) {
        throw ConfigError("d_model (" + std::to_string(d_model) + ") must be divisible by n_heads (" +
                          std::to_string(n_heads) + ")");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
}

SequenceBatch SequenceBatch::from(const std::vector<const corpus::TokenSequence*>& seqs) {
    SequenceBatch out;
    out.batch = seqs.size();
    if (seqs.empty()) return out;
    out.length = seqs.front()->ids.size();
    for (const auto* s : seqs) {
        if (s->ids.size() != out.length || s->type_ids.size() != out.length) {
            throw ShapeError("sequence batch: all sequences must share one padded length");
        }
        out.ids.insert(out.ids.end(), s->ids.begin(), s->ids.end());
        out.type_ids.insert(out.type_ids.end(), s->type_ids.begin(), s->type_ids.end());
        out.masks.push_back(s->attention_mask());
    }
    return out;
}

SequenceBatch SequenceBatch::from(const corpus::TokenSequence& seq) { return from(std::vector{&seq}); }

Tensor embed_tokens(const SequenceBatch& batch, const EmbeddingTables& tables) {
    if (batch.length > tables.position.rows()) {
        throw ShapeError("embed_tokens: sequence length " + std::to_string(batch.length) + " exceeds position table " +
                         tables.position.shape_str());
    }
    std::vector<std::size_t> positions(batch.ids.size());
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i % batch.length;
    return nc::add(nc::add(nc::embedding_lookup(tables.word, batch.ids), nc::embedding_lookup(tables.position, positions)),
                   nc::embedding_lookup(tables.token_type, batch.type_ids));
}

Tensor encoder_forward(const Tensor& x, const SequenceBatch& batch, const std::vector<EncoderLayer>& layers,
                       const EncoderConfig& cfg, const ForwardOptions& opts) {
    if (x.rows() != batch.batch * batch.length || x.cols() != cfg.d_model) {
        throw ShapeError("encoder_forward: input " + x.shape_str() + " does not match batch " +
                         std::to_string(batch.batch) + "x" + std::to_string(batch.length) + " at d_model " +
                         std::to_string(cfg.d_model));
    }
    Tensor h = x;
    for (const auto& layer : layers) {
        const Tensor attn = maybe_dropout(self_attention(h, batch, layer, cfg, opts), cfg, opts);
        h = nc::layer_norm(nc::add(h, attn), layer.ln1_gain, layer.ln1_bias);
        const Tensor ff = linear(nc::gelu(linear(h, layer.ff1, layer.ff1_bias)), layer.ff2, layer.ff2_bias);
        h = nc::layer_norm(nc::add(h, maybe_dropout(ff, cfg, opts)), layer.ln2_gain, layer.ln2_bias);
    }
    return h;
}

Tensor pool_cls(const Tensor& h, const SequenceBatch& batch) {
    std::vector<std::size_t> rows(batch.batch);
    for (std::size_t b = 0; b < batch.batch; ++b) rows[b] = b * batch.length;
    return nc::embedding_lookup(h, rows);
}

Tensor pool_mean(const Tensor& h, const SequenceBatch& batch) {
    std::vector<Tensor> pooled;
    pooled.reserve(batch.batch);
    for (std::size_t b = 0; b < batch.batch; ++b) {
        std::size_t n = 0;
        for (bool m : batch.masks[b]) n += m ? 1 : 0;
        if (n == 0) throw DataError("pool_mean: sequence " + std::to_string(b) + " is fully masked");
        // Unmasked tokens form a prefix: [CLS] ... [SEP] then padding.
        pooled.push_back(nc::mean(nc::slice_rows(h, b * batch.length, n), 0));
    }
    return batch.batch == 1 ? pooled[0] : nc::concat(pooled, 0);
}

Encoder::Encoder(const EncoderConfig& cfg, nc::ParameterStore& store, nc::Rng& rng, const std::string& prefix)
    : cfg_(cfg) {
    cfg_.validate();
    const std::size_t d = cfg_.d_model;
    tables_.word = normal_init(store, prefix + ".word", cfg_.vocab_size, d, rng);
    tables_.position = normal_init(store, prefix + ".position", cfg_.max_len, d, rng);
    tables_.token_type = normal_init(store, prefix + ".token_type", cfg_.type_vocab, d, rng);
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
        const std::string p = prefix + ".layer" + std::to_string(l) + ".";
        EncoderLayer L;
        L.wq = xavier_init(store, p + "wq", d, d, rng);
        L.bq = store.add(p + "bq", 1, d);
        L.wk = xavier_init(store, p + "wk", d, d, rng);
        L.bk = store.add(p + "bk", 1, d);
        L.wv = xavier_init(store, p + "wv", d, d, rng);
        L.bv = store.add(p + "bv", 1, d);
        L.wo = xavier_init(store, p + "wo", d, d, rng);
        L.bo = store.add(p + "bo", 1, d);
        L.ln1_gain = ones_init(store, p + "ln1.gain", d);
        L.ln1_bias = store.add(p + "ln1.bias", 1, d);
        L.ff1 = xavier_init(store, p + "ff1", d, cfg_.d_ff, rng);
        L.ff1_bias = store.add(p + "ff1.bias", 1, cfg_.d_ff);
        L.ff2 = xavier_init(store, p + "ff2", cfg_.d_ff, d, rng);
        L.ff2_bias = store.add(p + "ff2.bias", 1, d);
        L.ln2_gain = ones_init(store, p + "ln2.gain", d);
        L.ln2_bias = store.add(p + "ln2.bias", 1, d);
        layers_.push_back(std::move(L));
    }
}

}  // namespace fraudfuse::encoder
