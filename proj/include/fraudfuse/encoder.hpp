#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fraudfuse/corpusgen.hpp"
#include "fraudfuse/numcore/random.hpp"
#include "fraudfuse/numcore/tensor.hpp"

namespace fraudfuse::encoder {

struct EncoderConfig {
    std::size_t vocab_size = 26;
    std::size_t type_vocab = 2;
    std::size_t d_model = 64;
    std::size_t n_layers = 2;
    std::size_t n_heads = 4;
    std::size_t d_ff = 256;
    std::size_t max_len = 128;
    double dropout = 0.1;

    void validate() const;
};

struct EmbeddingTables {
    nc::Tensor word;        // vocab_size x d_model
    nc::Tensor position;    // max_len x d_model
    nc::Tensor token_type;  // type_vocab x d_model
};

struct EncoderLayer {
    nc::Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    nc::Tensor ln1_gain, ln1_bias;
    nc::Tensor ff1, ff1_bias, ff2, ff2_bias;
    nc::Tensor ln2_gain, ln2_bias;
};

// A batch of B token sequences of common length L, laid out as B*L rows.
struct SequenceBatch {
    std::size_t batch = 0;
    std::size_t length = 0;
    std::vector<std::size_t> ids;
    std::vector<std::size_t> type_ids;
    std::vector<std::vector<bool>> masks;  // per sequence, true = real token

    static SequenceBatch from(const std::vector<const corpus::TokenSequence*>& seqs);
    static SequenceBatch from(const corpus::TokenSequence& seq);
};

// Row b*L + i is word[id] + position[i] + token_type[type]. Throws
// ShapeError for an id outside the tables.
nc::Tensor embed_tokens(const SequenceBatch& batch, const EmbeddingTables& tables);

struct ForwardOptions {
    bool train = false;
    nc::Rng* dropout_rng = nullptr;  // required when train and dropout > 0
    // When set, receives the attention matrix of every (layer, sequence, head).
    std::vector<nc::Tensor>* attention_out = nullptr;
};

// Post-LN transformer blocks: x = LN(x + MHA(x)); x = LN(x + FFN(x)).
// Keys at masked positions get weight exactly 0.
nc::Tensor encoder_forward(const nc::Tensor& x, const SequenceBatch& batch, const std::vector<EncoderLayer>& layers,
                           const EncoderConfig& cfg, const ForwardOptions& opts = {});

// Row 0 of every sequence: B x d_model.
nc::Tensor pool_cls(const nc::Tensor& h, const SequenceBatch& batch);

// Mean over the unmasked rows of every sequence: B x d_model. Throws
// DataError if a sequence has no unmasked row.
nc::Tensor pool_mean(const nc::Tensor& h, const SequenceBatch& batch);

// Owns the registration of all encoder parameters under `prefix` in a store.
class Encoder {
public:
    Encoder(const EncoderConfig& cfg, nc::ParameterStore& store, nc::Rng& init_rng, const std::string& prefix = "encoder");

    const EncoderConfig& config() const { return cfg_; }
    const EmbeddingTables& tables() const { return tables_; }
    const std::vector<EncoderLayer>& layers() const { return layers_; }

    nc::Tensor embed(const SequenceBatch& batch) const { return embed_tokens(batch, tables_); }
    nc::Tensor forward(const nc::Tensor& x, const SequenceBatch& batch, const ForwardOptions& opts = {}) const {
        return encoder_forward(x, batch, layers_, cfg_, opts);
    }

private:
    EncoderConfig cfg_;
    EmbeddingTables tables_;
    std::vector<EncoderLayer> layers_;
};

}  // namespace fraudfuse::encoder
