#pragma once

#include <map>
#include <string>
#include <vector>

#include "textsr/core/ops.hpp"
#include "textsr/core/rng.hpp"

namespace textsr::nn {

// Named view over a model's weights; std::map keeps iteration order stable
// for serialization and optimizer updates.
using ParamMap = std::map<std::string, Param*>;

struct Conv2d {
    Param w, b;
    int stride = 1, pad = 0, dil = 1;
    bool has_bias = true;

    void init(int ci, int co, int k, Rng& rng, int stride_ = 1, int pad_ = -1, int dil_ = 1,
              bool bias = true);
    void init_zero(int ci, int co, int k, int stride_ = 1, int pad_ = -1, int dil_ = 1);
    Val operator()(Graph& g, Val x);
    void collect(ParamMap& m, const std::string& prefix);
    void set_trainable(bool t);
};

struct Linear {
    Param w, b;
    bool has_bias = true;

    void init(int in, int out, Rng& rng, bool bias = true);
    void init_zero(int in, int out, bool bias = true);
    Val operator()(Graph& g, Val x);  // x (M, in) -> (M, out)
    void collect(ParamMap& m, const std::string& prefix);
    void set_trainable(bool t);
};

struct GroupNorm {
    Param gamma, beta;
    int groups = 1;
    real eps = 1e-5;

    void init(int channels, int groups_);
    Val operator()(Graph& g, Val x);
    void collect(ParamMap& m, const std::string& prefix);
    void set_trainable(bool t);
};

// Single-direction GRU over a sequence-major tensor (T, B, C) -> (T, B, H).
// The input projection for all timesteps runs as one matmul up front; only
// the hidden-to-hidden path is sequential.
struct GRU {
    Linear wx;              // C -> 3H, gate order (r, z, n), carries both bias sets
    Linear whr, whz, whn;   // H -> H; whn keeps the bias inside the reset gate
    int hidden = 0;

    void init(int input, int hidden_, Rng& rng);
    Val run(Graph& g, Val seq, bool reverse) const;
    void collect(ParamMap& m, const std::string& prefix);
    void set_trainable(bool t);
};

// Bidirectional GRU; output feature dim is 2H.
struct BiGRU {
    GRU fwd, bwd;

    void init(int input, int hidden, Rng& rng);
    Val run(Graph& g, Val seq) const;  // (T, B, C) -> (T, B, 2H)
    void collect(ParamMap& m, const std::string& prefix);
    void set_trainable(bool t);
};

// Pre-norm single-head self-attention over spatial positions of NCHW,
// with residual connection.
struct SelfAttention2d {
    GroupNorm norm;
    Linear q, k, v, proj;
    int channels = 0;

    void init(int channels_, Rng& rng);
    Val operator()(Graph& g, Val x);
    void collect(ParamMap& m, const std::string& prefix);
};

// Single-head cross attention: queries (N,W,C), keys/values from a context
// sequence (N,L,Ck) projected to C. Returns the attended context (N,W,C).
struct CrossAttentionSeq {
    Linear q, k, v, proj;
    int channels = 0;

    void init(int channels_, int ctx_dim, Rng& rng);
    Val operator()(Graph& g, Val queries, Val context);
    void collect(ParamMap& m, const std::string& prefix);
};

// Sinusoidal timestep embedding, one row per batch entry.
Tensor sinusoidal_embedding(const std::vector<int>& t, int dim);

int64_t param_count(const ParamMap& m);

// FNV-1a over raw bytes of all params in map order; frozen-weights checks.
uint64_t param_checksum(const ParamMap& m);

}  // namespace textsr::nn
