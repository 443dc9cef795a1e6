#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mathrel/data.hpp"
#include "mathrel/rng.hpp"

namespace mathrel::model {

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonFiniteError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ModelConfig {
    int d_model = 64;
    int n_layers = 2;
    int n_heads = 4;
    int ffn_dim = 256;
    int max_len = 50;
    int n_classes = data::kNumClasses;
    double dropout_rate = 0.1;
    double layer_norm_epsilon = 1e-5;

    void validate() const {
        if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || ffn_dim <= 0 ||
            max_len <= 0) {
            throw std::invalid_argument("model dimensions must be positive");
        }
        if (d_model % n_heads != 0) {
            throw std::invalid_argument("d_model must be divisible by n_heads");
        }
        if (n_classes != data::kNumClasses) {
            throw std::invalid_argument("n_classes must be 6");
        }
        if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
            throw std::invalid_argument("dropout_rate must be in [0,1)");
        }
        if (layer_norm_epsilon <= 0.0) {
            throw std::invalid_argument("layer_norm_epsilon must be positive");
        }
    }
};

template <typename T>
struct Tensor {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> v;

    Tensor() = default;
    Tensor(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, T(0)) {}

    T* row(std::size_t r) { return v.data() + r * cols; }
    const T* row(std::size_t r) const { return v.data() + r * cols; }
    T& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
    T at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
    std::size_t size() const { return v.size(); }
    void zero() { std::fill(v.begin(), v.end(), T(0)); }
};

// The key projection carries no bias: a bias on K shifts every attention
// score for a query by the same constant, which softmax cancels exactly.
template <typename T>
struct LayerParams {
    Tensor<T> wq, bq, wk, wv, bv, wo, bo;
    Tensor<T> ln1_g, ln1_b;
    Tensor<T> w1, b1, w2, b2;
    Tensor<T> ln2_g, ln2_b;
};

template <typename T>
struct Parameters {
    Tensor<T> tok_emb;  // [vocab, d]
    Tensor<T> pos_emb;  // [max_len, d]
    Tensor<T> seg_emb;  // [2, d]
    std::vector<LayerParams<T>> layers;
    Tensor<T> head_w;  // [d, n_classes]
    Tensor<T> head_b;  // [1, n_classes]
};

template <typename T>
struct NamedTensorRef {
    std::string name;
    Tensor<T>* tensor;
    bool decay;  // weight decay applies (biases and layer norms are exempt)
};

template <typename T>
std::vector<NamedTensorRef<T>> tensor_refs(Parameters<T>& p) {
    std::vector<NamedTensorRef<T>> refs;
    refs.push_back({"tok_emb", &p.tok_emb, true});
    refs.push_back({"pos_emb", &p.pos_emb, true});
    refs.push_back({"seg_emb", &p.seg_emb, true});
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        auto& lay = p.layers[l];
        const std::string pre = "layer" + std::to_string(l) + ".";
        refs.push_back({pre + "wq", &lay.wq, true});
        refs.push_back({pre + "bq", &lay.bq, false});
        refs.push_back({pre + "wk", &lay.wk, true});
        refs.push_back({pre + "wv", &lay.wv, true});
        refs.push_back({pre + "bv", &lay.bv, false});
        refs.push_back({pre + "wo", &lay.wo, true});
        refs.push_back({pre + "bo", &lay.bo, false});
        refs.push_back({pre + "ln1_g", &lay.ln1_g, false});
        refs.push_back({pre + "ln1_b", &lay.ln1_b, false});
        refs.push_back({pre + "w1", &lay.w1, true});
        refs.push_back({pre + "b1", &lay.b1, false});
        refs.push_back({pre + "w2", &lay.w2, true});
        refs.push_back({pre + "b2", &lay.b2, false});
        refs.push_back({pre + "ln2_g", &lay.ln2_g, false});
        refs.push_back({pre + "ln2_b", &lay.ln2_b, false});
    }
    refs.push_back({"head_w", &p.head_w, true});
    refs.push_back({"head_b", &p.head_b, false});
    return refs;
}

template <typename T>
Parameters<T> zero_parameters(const ModelConfig& cfg, int vocab_size) {
    cfg.validate();
    const auto d = static_cast<std::size_t>(cfg.d_model);
    const auto f = static_cast<std::size_t>(cfg.ffn_dim);
    Parameters<T> p;
    p.tok_emb = Tensor<T>(static_cast<std::size_t>(vocab_size), d);
    p.pos_emb = Tensor<T>(static_cast<std::size_t>(cfg.max_len), d);
    p.seg_emb = Tensor<T>(2, d);
    p.layers.resize(static_cast<std::size_t>(cfg.n_layers));
    for (auto& lay : p.layers) {
        lay.wq = Tensor<T>(d, d);
        lay.bq = Tensor<T>(1, d);
        lay.wk = Tensor<T>(d, d);
        lay.wv = Tensor<T>(d, d);
        lay.bv = Tensor<T>(1, d);
        lay.wo = Tensor<T>(d, d);
        lay.bo = Tensor<T>(1, d);
        lay.ln1_g = Tensor<T>(1, d);
        lay.ln1_b = Tensor<T>(1, d);
        lay.w1 = Tensor<T>(d, f);
        lay.b1 = Tensor<T>(1, f);
        lay.w2 = Tensor<T>(f, d);
        lay.b2 = Tensor<T>(1, d);
        lay.ln2_g = Tensor<T>(1, d);
        lay.ln2_b = Tensor<T>(1, d);
    }
    p.head_w = Tensor<T>(d, static_cast<std::size_t>(cfg.n_classes));
    p.head_b = Tensor<T>(1, static_cast<std::size_t>(cfg.n_classes));
    return p;
}

// Seeded init: weights ~ N(0, 0.02^2); biases and layer-norm shifts zero;
// layer-norm scales one.
template <typename T>
Parameters<T> init_parameters(const ModelConfig& cfg, int vocab_size,
                              std::uint64_t seed) {
    Parameters<T> p = zero_parameters<T>(cfg, vocab_size);
    Rng rng(seed);
    for (auto& ref : tensor_refs(p)) {
        const bool is_ln_scale = ref.name.find("ln") != std::string::npos &&
                                 ref.name.back() == 'g';
        const bool is_bias = !ref.decay;
        if (is_ln_scale) {
            std::fill(ref.tensor->v.begin(), ref.tensor->v.end(), T(1));
        } else if (is_bias) {
            ref.tensor->zero();
        } else {
            for (auto& w : ref.tensor->v) w = static_cast<T>(rng.normal() * 0.02);
        }
    }
    return p;
}

// Generic-position parameters for gradient probing: wider weights and
// perturbed biases/norm terms. At the training init (std 0.02) the attention
// score surface is so flat that its gradients fall below the central
// finite-difference noise floor, which would make relative comparison
// meaningless.
template <typename T>
Parameters<T> probe_parameters(const ModelConfig& cfg, int vocab_size,
                               std::uint64_t seed) {
    Parameters<T> p = zero_parameters<T>(cfg, vocab_size);
    Rng rng(seed);
    for (auto& ref : tensor_refs(p)) {
        const bool is_ln_scale = ref.name.find("ln") != std::string::npos &&
                                 ref.name.back() == 'g';
        if (is_ln_scale) {
            for (auto& w : ref.tensor->v) w = static_cast<T>(1.0 + rng.normal() * 0.1);
        } else if (!ref.decay) {
            for (auto& w : ref.tensor->v) w = static_cast<T>(rng.normal() * 0.1);
        } else {
            for (auto& w : ref.tensor->v) w = static_cast<T>(rng.normal() * 0.2);
        }
    }
    return p;
}

struct EncodedInput {
    std::vector<int> ids;
    std::vector<std::uint8_t> attention_mask;
    std::vector<std::uint8_t> segment_ids;
};

enum class RunMode { Train, Eval };

namespace detail {

// y[M,N] += x[M,K] . w[K,N]
template <typename T>
void matmul_acc(const T* x, const T* w, T* y, std::size_t M, std::size_t K,
                std::size_t N) {
    for (std::size_t i = 0; i < M; ++i) {
        const T* xi = x + i * K;
        T* yi = y + i * N;
        for (std::size_t k = 0; k < K; ++k) {
            const T xv = xi[k];
            if (xv == T(0)) continue;
            const T* wk = w + k * N;
            for (std::size_t n = 0; n < N; ++n) yi[n] += xv * wk[n];
        }
    }
}

// y[K,N] += x[M,K]^T . g[M,N]   (weight gradient)
template <typename T>
void matmul_at_acc(const T* x, const T* g, T* y, std::size_t M, std::size_t K,
                   std::size_t N) {
    for (std::size_t i = 0; i < M; ++i) {
        const T* xi = x + i * K;
        const T* gi = g + i * N;
        for (std::size_t k = 0; k < K; ++k) {
            const T xv = xi[k];
            if (xv == T(0)) continue;
            T* yk = y + k * N;
            for (std::size_t n = 0; n < N; ++n) yk[n] += xv * gi[n];
        }
    }
}

// y[M,K] += g[M,N] . w[K,N]^T   (input gradient)
template <typename T>
void matmul_bt_acc(const T* g, const T* w, T* y, std::size_t M, std::size_t K,
                   std::size_t N) {
    for (std::size_t i = 0; i < M; ++i) {
        const T* gi = g + i * N;
        T* yi = y + i * K;
        for (std::size_t k = 0; k < K; ++k) {
            const T* wk = w + k * N;
            T acc = T(0);
            for (std::size_t n = 0; n < N; ++n) acc += gi[n] * wk[n];
            yi[k] += acc;
        }
    }
}

template <typename T>
T gelu(T x) {
    return T(0.5) * x * (T(1) + std::erf(x * T(0.7071067811865475244)));
}

template <typename T>
T gelu_grad(T x) {
    const T phi = T(0.5) * (T(1) + std::erf(x * T(0.7071067811865475244)));
    const T pdf = std::exp(T(-0.5) * x * x) * T(0.3989422804014326779);
    return phi + x * pdf;
}

}  // namespace detail

// Per-layer activations retained for the backward pass.
template <typename T>
struct LayerCache {
    std::vector<T> q, k, v;          // [B*L*D]
    std::vector<T> probs;            // [B*H*L*L]
    std::vector<T> concat;           // [B*L*D]
    std::vector<T> drop1, drop2;     // dropout scale factors [B*L*D]
    std::vector<T> xhat1, xhat2;     // [B*L*D]
    std::vector<T> rstd1, rstd2;     // [B*L]
    std::vector<T> y1;               // LN1 output [B*L*D]
    std::vector<T> ffn_pre, ffn_act; // [B*L*F]
};

template <typename T>
struct BatchCache {
    std::size_t B = 0, L = 0;
    std::vector<std::vector<T>> x;  // n_layers+1 activations, each [B*L*D]
    std::vector<LayerCache<T>> layers;
    std::vector<T> cls;             // [B*D]
    std::vector<std::array<T, data::kNumClasses>> probs;
};

// Optional per-layer attention probabilities for inspection:
// attn_out[layer] is a [B*H*L*L] buffer.
template <typename T>
struct BatchResult {
    std::vector<std::array<T, data::kNumClasses>> probs;
    double loss = 0.0;  // mean cross entropy when labels given
    std::size_t effective_len = 0;
};

template <typename T>
BatchResult<T> run_batch(const ModelConfig& cfg, const Parameters<T>& params,
                         const std::vector<EncodedInput>& batch, RunMode mode,
                         Rng* dropout_rng, const std::vector<int>* labels,
                         Parameters<T>* grads,
                         std::vector<std::vector<T>>* attn_out = nullptr) {
    if (batch.empty()) throw ShapeError("empty batch");
    const auto B = batch.size();
    const auto D = static_cast<std::size_t>(cfg.d_model);
    const auto H = static_cast<std::size_t>(cfg.n_heads);
    const auto dh = D / H;
    const auto F = static_cast<std::size_t>(cfg.ffn_dim);
    const auto C = static_cast<std::size_t>(cfg.n_classes);
    const auto max_len = static_cast<std::size_t>(cfg.max_len);

    std::size_t L = 1;
    for (const auto& in : batch) {
        if (in.ids.size() != max_len || in.attention_mask.size() != max_len ||
            in.segment_ids.size() != max_len) {
            throw ShapeError("encoded input length differs from max_len");
        }
        std::size_t real = 0;
        for (std::size_t t = 0; t < max_len; ++t) {
            if (in.attention_mask[t]) real = t + 1;
        }
        L = std::max(L, real);
    }
    if (labels && labels->size() != B) throw ShapeError("labels/batch mismatch");
    if (params.tok_emb.cols != D || params.pos_emb.rows != max_len) {
        throw ShapeError("parameter shapes inconsistent with config");
    }

    const bool want_grads = grads != nullptr;
    const bool use_dropout =
        mode == RunMode::Train && cfg.dropout_rate > 0.0 && dropout_rng != nullptr;
    const T keep_scale = static_cast<T>(1.0 / (1.0 - cfg.dropout_rate));

    const std::size_t BLD = B * L * D;
    const std::size_t BLF = B * L * F;
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    const T neg_inf = static_cast<T>(-1e30);

    BatchCache<T> cache;
    cache.B = B;
    cache.L = L;
    cache.x.resize(static_cast<std::size_t>(cfg.n_layers) + 1);
    cache.layers.resize(static_cast<std::size_t>(cfg.n_layers));

    // ---- embeddings ----
    auto& x0 = cache.x[0];
    x0.assign(BLD, T(0));
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t t = 0; t < L; ++t) {
            const int id = batch[b].ids[t];
            if (id < 0 || static_cast<std::size_t>(id) >= params.tok_emb.rows) {
                throw ShapeError("token id out of vocabulary range");
            }
            const int seg = batch[b].segment_ids[t] ? 1 : 0;
            const T* te = params.tok_emb.row(static_cast<std::size_t>(id));
            const T* pe = params.pos_emb.row(t);
            const T* se = params.seg_emb.row(static_cast<std::size_t>(seg));
            T* out = x0.data() + (b * L + t) * D;
            for (std::size_t dd = 0; dd < D; ++dd) out[dd] = te[dd] + pe[dd] + se[dd];
        }
    }

    const auto layer_norm = [&](const std::vector<T>& in, const Tensor<T>& g,
                                const Tensor<T>& beta, std::vector<T>& xhat,
                                std::vector<T>& rstd, std::vector<T>& out) {
        xhat.assign(BLD, T(0));
        rstd.assign(B * L, T(0));
        out.assign(BLD, T(0));
        for (std::size_t r = 0; r < B * L; ++r) {
            const T* xi = in.data() + r * D;
            T mean = T(0);
            for (std::size_t dd = 0; dd < D; ++dd) mean += xi[dd];
            mean /= static_cast<T>(D);
            T var = T(0);
            for (std::size_t dd = 0; dd < D; ++dd) {
                const T c = xi[dd] - mean;
                var += c * c;
            }
            var /= static_cast<T>(D);
            const T rs = T(1) / std::sqrt(var + static_cast<T>(cfg.layer_norm_epsilon));
            rstd[r] = rs;
            T* xh = xhat.data() + r * D;
            T* o = out.data() + r * D;
            for (std::size_t dd = 0; dd < D; ++dd) {
                xh[dd] = (xi[dd] - mean) * rs;
                o[dd] = g.v[dd] * xh[dd] + beta.v[dd];
            }
        }
    };

    const auto apply_dropout = [&](std::vector<T>& buf, std::vector<T>& mask) {
        if (!use_dropout) return;
        mask.resize(buf.size());
        for (std::size_t i = 0; i < buf.size(); ++i) {
            const bool drop = dropout_rng->uniform_real() < cfg.dropout_rate;
            mask[i] = drop ? T(0) : keep_scale;
            buf[i] *= mask[i];
        }
    };

    // ---- encoder layers ----
    std::vector<T> scores(H * L * L);
    for (std::size_t l = 0; l < static_cast<std::size_t>(cfg.n_layers); ++l) {
        const auto& lp = params.layers[l];
        auto& lc = cache.layers[l];
        const auto& xin = cache.x[l];

        lc.q.assign(BLD, T(0));
        lc.k.assign(BLD, T(0));
        lc.v.assign(BLD, T(0));
        for (std::size_t b = 0; b < B; ++b) {
            const T* xb = xin.data() + b * L * D;
            T* qb = lc.q.data() + b * L * D;
            T* kb = lc.k.data() + b * L * D;
            T* vb = lc.v.data() + b * L * D;
            for (std::size_t t = 0; t < L; ++t) {
                for (std::size_t dd = 0; dd < D; ++dd) {
                    qb[t * D + dd] = lp.bq.v[dd];
                    vb[t * D + dd] = lp.bv.v[dd];
                }
            }
            detail::matmul_acc(xb, lp.wq.v.data(), qb, L, D, D);
            detail::matmul_acc(xb, lp.wk.v.data(), kb, L, D, D);
            detail::matmul_acc(xb, lp.wv.v.data(), vb, L, D, D);
        }

        lc.probs.assign(B * H * L * L, T(0));
        lc.concat.assign(BLD, T(0));
        for (std::size_t b = 0; b < B; ++b) {
            const T* qb = lc.q.data() + b * L * D;
            const T* kb = lc.k.data() + b * L * D;
            const T* vb = lc.v.data() + b * L * D;
            for (std::size_t h = 0; h < H; ++h) {
                // scores
                for (std::size_t qpos = 0; qpos < L; ++qpos) {
                    const T* qrow = qb + qpos * D + h * dh;
                    T* srow = scores.data() + (h * L + qpos) * L;
                    for (std::size_t kpos = 0; kpos < L; ++kpos) {
                        if (!batch[b].attention_mask[kpos]) {
                            srow[kpos] = neg_inf;
                            continue;
                        }
                        const T* krow = kb + kpos * D + h * dh;
                        T acc = T(0);
                        for (std::size_t dd = 0; dd < dh; ++dd) acc += qrow[dd] * krow[dd];
                        srow[kpos] = acc * scale;
                    }
                }
                // softmax over keys + context
                for (std::size_t qpos = 0; qpos < L; ++qpos) {
                    T* srow = scores.data() + (h * L + qpos) * L;
                    T mx = srow[0];
                    for (std::size_t kpos = 1; kpos < L; ++kpos) mx = std::max(mx, srow[kpos]);
                    T sum = T(0);
                    for (std::size_t kpos = 0; kpos < L; ++kpos) {
                        srow[kpos] = std::exp(srow[kpos] - mx);
                        sum += srow[kpos];
                    }
                    T* prow = lc.probs.data() + ((b * H + h) * L + qpos) * L;
                    T* crow = lc.concat.data() + (b * L + qpos) * D + h * dh;
                    for (std::size_t kpos = 0; kpos < L; ++kpos) {
                        prow[kpos] = srow[kpos] / sum;
                    }
                    for (std::size_t kpos = 0; kpos < L; ++kpos) {
                        const T p = prow[kpos];
                        if (p == T(0)) continue;
                        const T* vrow = vb + kpos * D + h * dh;
                        for (std::size_t dd = 0; dd < dh; ++dd) crow[dd] += p * vrow[dd];
                    }
                }
            }
        }
        if (attn_out) attn_out->push_back(lc.probs);

        // output projection + dropout + residual
        std::vector<T> sum1(BLD);
        {
            std::vector<T> proj(BLD, T(0));
            for (std::size_t b = 0; b < B; ++b) {
                T* pb = proj.data() + b * L * D;
                for (std::size_t t = 0; t < L; ++t) {
                    for (std::size_t dd = 0; dd < D; ++dd) pb[t * D + dd] = lp.bo.v[dd];
                }
                detail::matmul_acc(lc.concat.data() + b * L * D, lp.wo.v.data(), pb, L, D, D);
            }
            apply_dropout(proj, lc.drop1);
            for (std::size_t i = 0; i < BLD; ++i) sum1[i] = xin[i] + proj[i];
        }
        layer_norm(sum1, lp.ln1_g, lp.ln1_b, lc.xhat1, lc.rstd1, lc.y1);

        // feed forward
        lc.ffn_pre.assign(BLF, T(0));
        for (std::size_t b = 0; b < B; ++b) {
            T* fb = lc.ffn_pre.data() + b * L * F;
            for (std::size_t t = 0; t < L; ++t) {
                for (std::size_t ff = 0; ff < F; ++ff) fb[t * F + ff] = lp.b1.v[ff];
            }
            detail::matmul_acc(lc.y1.data() + b * L * D, lp.w1.v.data(), fb, L, D, F);
        }
        lc.ffn_act.resize(BLF);
        for (std::size_t i = 0; i < BLF; ++i) lc.ffn_act[i] = detail::gelu(lc.ffn_pre[i]);

        std::vector<T> sum2(BLD);
        {
            std::vector<T> fout(BLD, T(0));
            for (std::size_t b = 0; b < B; ++b) {
                T* ob = fout.data() + b * L * D;
                for (std::size_t t = 0; t < L; ++t) {
                    for (std::size_t dd = 0; dd < D; ++dd) ob[t * D + dd] = lp.b2.v[dd];
                }
                detail::matmul_acc(lc.ffn_act.data() + b * L * F, lp.w2.v.data(), ob, L, F, D);
            }
            apply_dropout(fout, lc.drop2);
            for (std::size_t i = 0; i < BLD; ++i) sum2[i] = lc.y1[i] + fout[i];
        }
        layer_norm(sum2, lp.ln2_g, lp.ln2_b, lc.xhat2, lc.rstd2, cache.x[l + 1]);

        if (!want_grads) {
            // free what backward will not need
            lc.q.clear();
            lc.k.clear();
            lc.v.clear();
            lc.probs.clear();
            lc.concat.clear();
            lc.xhat1.clear();
            lc.xhat2.clear();
            lc.y1.clear();
            lc.ffn_pre.clear();
            lc.ffn_act.clear();
        }
    }

    // ---- classifier head on the CLS position ----
    const auto& xf = cache.x[static_cast<std::size_t>(cfg.n_layers)];
    cache.cls.assign(B * D, T(0));
    for (std::size_t b = 0; b < B; ++b) {
        const T* src = xf.data() + b * L * D;  // position 0
        std::copy(src, src + D, cache.cls.data() + b * D);
    }

    BatchResult<T> result;
    result.effective_len = L;
    result.probs.resize(B);
    std::vector<std::array<T, data::kNumClasses>> dlogits(B);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
        std::array<T, data::kNumClasses> logits{};
        for (std::size_t c = 0; c < C; ++c) logits[c] = params.head_b.v[c];
        const T* cls = cache.cls.data() + b * D;
        for (std::size_t dd = 0; dd < D; ++dd) {
            const T xv = cls[dd];
            const T* wr = params.head_w.row(dd);
            for (std::size_t c = 0; c < C; ++c) logits[c] += xv * wr[c];
        }
        T mx = logits[0];
        for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, logits[c]);
        T sum = T(0);
        std::array<T, data::kNumClasses> p{};
        for (std::size_t c = 0; c < C; ++c) {
            p[c] = std::exp(logits[c] - mx);
            sum += p[c];
        }
        for (std::size_t c = 0; c < C; ++c) {
            p[c] /= sum;
            if (!std::isfinite(static_cast<double>(p[c]))) {
                throw NonFiniteError("non-finite class probability");
            }
        }
        result.probs[b] = p;
        if (labels) {
            const int y = (*labels)[b];
            if (y < 0 || static_cast<std::size_t>(y) >= C) {
                throw ShapeError("label out of range");
            }
            loss_sum -= std::log(static_cast<double>(p[static_cast<std::size_t>(y)]));
            for (std::size_t c = 0; c < C; ++c) {
                dlogits[b][c] = (p[c] - (c == static_cast<std::size_t>(y) ? T(1) : T(0))) /
                                static_cast<T>(B);
            }
        }
    }
    if (labels) result.loss = loss_sum / static_cast<double>(B);
    cache.probs = result.probs;

    if (!want_grads) return result;
    if (!labels) throw ShapeError("backward requires labels");

    // ================= backward =================
    Parameters<T>& g = *grads;

    // head
    std::vector<T> dx(BLD, T(0));
    for (std::size_t b = 0; b < B; ++b) {
        const T* cls = cache.cls.data() + b * D;
        T* dcls = dx.data() + b * L * D;  // gradient lands on position 0
        for (std::size_t c = 0; c < C; ++c) g.head_b.v[c] += dlogits[b][c];
        for (std::size_t dd = 0; dd < D; ++dd) {
            T* gw = g.head_w.row(dd);
            const T* hw = params.head_w.row(dd);
            T acc = T(0);
            for (std::size_t c = 0; c < C; ++c) {
                gw[c] += cls[dd] * dlogits[b][c];
                acc += hw[c] * dlogits[b][c];
            }
            dcls[dd] += acc;
        }
    }

    const auto layer_norm_backward =
        [&](const std::vector<T>& dy, const std::vector<T>& xhat,
            const std::vector<T>& rstd, const Tensor<T>& gamma, Tensor<T>& dgamma,
            Tensor<T>& dbeta, std::vector<T>& dxout) {
            dxout.assign(BLD, T(0));
            for (std::size_t r = 0; r < B * L; ++r) {
                const T* dyr = dy.data() + r * D;
                const T* xh = xhat.data() + r * D;
                T* dxr = dxout.data() + r * D;
                T m1 = T(0), m2 = T(0);
                for (std::size_t dd = 0; dd < D; ++dd) {
                    const T dxh = dyr[dd] * gamma.v[dd];
                    m1 += dxh;
                    m2 += dxh * xh[dd];
                    dgamma.v[dd] += dyr[dd] * xh[dd];
                    dbeta.v[dd] += dyr[dd];
                }
                m1 /= static_cast<T>(D);
                m2 /= static_cast<T>(D);
                const T rs = rstd[r];
                for (std::size_t dd = 0; dd < D; ++dd) {
                    const T dxh = dyr[dd] * gamma.v[dd];
                    dxr[dd] = rs * (dxh - m1 - xh[dd] * m2);
                }
            }
        };

    for (int li = cfg.n_layers - 1; li >= 0; --li) {
        const auto l = static_cast<std::size_t>(li);
        const auto& lp = params.layers[l];
        auto& lg = g.layers[l];
        const auto& lc = cache.layers[l];
        const auto& xin = cache.x[l];

        // LN2 backward: dx currently holds d(layer output)
        std::vector<T> dsum2;
        layer_norm_backward(dx, lc.xhat2, lc.rstd2, lp.ln2_g, lg.ln2_g, lg.ln2_b,
                            dsum2);

        // residual: sum2 = y1 + dropout(ffn_out)
        std::vector<T> dy1 = dsum2;
        std::vector<T> dfout = dsum2;
        if (use_dropout) {
            for (std::size_t i = 0; i < BLD; ++i) dfout[i] *= lc.drop2[i];
        }

        // FFN backward
        std::vector<T> dact(BLF, T(0));
        for (std::size_t b = 0; b < B; ++b) {
            const T* db = dfout.data() + b * L * D;
            for (std::size_t t = 0; t < L; ++t) {
                const T* row = db + t * D;
                for (std::size_t dd = 0; dd < D; ++dd) lg.b2.v[dd] += row[dd];
            }
            detail::matmul_at_acc(lc.ffn_act.data() + b * L * F, db,
                                  lg.w2.v.data(), L, F, D);
            detail::matmul_bt_acc(db, lp.w2.v.data(), dact.data() + b * L * F, L,
                                  F, D);
        }
        std::vector<T> dpre(BLF);
        for (std::size_t i = 0; i < BLF; ++i) {
            dpre[i] = dact[i] * detail::gelu_grad(lc.ffn_pre[i]);
        }
        for (std::size_t b = 0; b < B; ++b) {
            const T* db = dpre.data() + b * L * F;
            for (std::size_t t = 0; t < L; ++t) {
                const T* row = db + t * F;
                for (std::size_t ff = 0; ff < F; ++ff) lg.b1.v[ff] += row[ff];
            }
            detail::matmul_at_acc(lc.y1.data() + b * L * D, db, lg.w1.v.data(), L,
                                  D, F);
            detail::matmul_bt_acc(db, lp.w1.v.data(), dy1.data() + b * L * D, L,
                                  D, F);
        }

        // LN1 backward
        std::vector<T> dsum1;
        layer_norm_backward(dy1, lc.xhat1, lc.rstd1, lp.ln1_g, lg.ln1_g, lg.ln1_b,
                            dsum1);

        // residual: sum1 = x_in + dropout(attn_proj)
        std::vector<T> dxin = dsum1;
        std::vector<T> dproj = dsum1;
        if (use_dropout) {
            for (std::size_t i = 0; i < BLD; ++i) dproj[i] *= lc.drop1[i];
        }

        // output projection backward
        std::vector<T> dconcat(BLD, T(0));
        for (std::size_t b = 0; b < B; ++b) {
            const T* db = dproj.data() + b * L * D;
            for (std::size_t t = 0; t < L; ++t) {
                const T* row = db + t * D;
                for (std::size_t dd = 0; dd < D; ++dd) lg.bo.v[dd] += row[dd];
            }
            detail::matmul_at_acc(lc.concat.data() + b * L * D, db,
                                  lg.wo.v.data(), L, D, D);
            detail::matmul_bt_acc(db, lp.wo.v.data(), dconcat.data() + b * L * D,
                                  L, D, D);
        }

        // attention backward
        std::vector<T> dq(BLD, T(0)), dk(BLD, T(0)), dv(BLD, T(0));
        std::vector<T> dprobs(L * L), dscores(L * L);
        for (std::size_t b = 0; b < B; ++b) {
            const T* qb = lc.q.data() + b * L * D;
            const T* kb = lc.k.data() + b * L * D;
            const T* vb = lc.v.data() + b * L * D;
            for (std::size_t h = 0; h < H; ++h) {
                const T* pball = lc.probs.data() + (b * H + h) * L * L;
                // dprobs = dctx . V^T ; dV += probs^T . dctx
                for (std::size_t qpos = 0; qpos < L; ++qpos) {
                    const T* dctx = dconcat.data() + (b * L + qpos) * D + h * dh;
                    const T* prow = pball + qpos * L;
                    T* dprow = dprobs.data() + qpos * L;
                    for (std::size_t kpos = 0; kpos < L; ++kpos) {
                        const T* vrow = vb + kpos * D + h * dh;
                        T acc = T(0);
                        for (std::size_t dd = 0; dd < dh; ++dd) acc += dctx[dd] * vrow[dd];
                        dprow[kpos] = acc;
                        const T p = prow[kpos];
                        if (p != T(0)) {
                            T* dvrow = dv.data() + (b * L + kpos) * D + h * dh;
                            for (std::size_t dd = 0; dd < dh; ++dd) {
                                dvrow[dd] += p * dctx[dd];
                            }
                        }
                    }
                }
                // softmax backward
                for (std::size_t qpos = 0; qpos < L; ++qpos) {
                    const T* prow = pball + qpos * L;
                    const T* dprow = dprobs.data() + qpos * L;
                    T dot = T(0);
                    for (std::size_t kpos = 0; kpos < L; ++kpos) {
                        dot += prow[kpos] * dprow[kpos];
                    }
                    T* dsrow = dscores.data() + qpos * L;
                    for (std::size_t kpos = 0; kpos < L; ++kpos) {
                        dsrow[kpos] = prow[kpos] * (dprow[kpos] - dot);
                    }
                }
                // dQ += ds . K * scale ; dK += ds^T . Q * scale
                for (std::size_t qpos = 0; qpos < L; ++qpos) {
                    const T* dsrow = dscores.data() + qpos * L;
                    T* dqrow = dq.data() + (b * L + qpos) * D + h * dh;
                    const T* qrow = qb + qpos * D + h * dh;
                    for (std::size_t kpos = 0; kpos < L; ++kpos) {
                        const T ds = dsrow[kpos] * scale;
                        if (ds == T(0)) continue;
                        const T* krow = kb + kpos * D + h * dh;
                        T* dkrow = dk.data() + (b * L + kpos) * D + h * dh;
                        for (std::size_t dd = 0; dd < dh; ++dd) {
                            dqrow[dd] += ds * krow[dd];
                            dkrow[dd] += ds * qrow[dd];
                        }
                    }
                }
            }
        }

        // projection backward into x_in and weights
        for (std::size_t b = 0; b < B; ++b) {
            const T* xb = xin.data() + b * L * D;
            const auto off = b * L * D;
            for (std::size_t t = 0; t < L; ++t) {
                const T* dqr = dq.data() + off + t * D;
                const T* dvr = dv.data() + off + t * D;
                for (std::size_t dd = 0; dd < D; ++dd) {
                    lg.bq.v[dd] += dqr[dd];
                    lg.bv.v[dd] += dvr[dd];
                }
            }
            detail::matmul_at_acc(xb, dq.data() + off, lg.wq.v.data(), L, D, D);
            detail::matmul_at_acc(xb, dk.data() + off, lg.wk.v.data(), L, D, D);
            detail::matmul_at_acc(xb, dv.data() + off, lg.wv.v.data(), L, D, D);
            detail::matmul_bt_acc(dq.data() + off, lp.wq.v.data(), dxin.data() + off, L, D, D);
            detail::matmul_bt_acc(dk.data() + off, lp.wk.v.data(), dxin.data() + off, L, D, D);
            detail::matmul_bt_acc(dv.data() + off, lp.wv.v.data(), dxin.data() + off, L, D, D);
        }

        dx = std::move(dxin);
    }

    // embeddings backward
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t t = 0; t < L; ++t) {
            const int id = batch[b].ids[t];
            const int seg = batch[b].segment_ids[t] ? 1 : 0;
            const T* dr = dx.data() + (b * L + t) * D;
            T* gte = g.tok_emb.row(static_cast<std::size_t>(id));
            T* gpe = g.pos_emb.row(t);
            T* gse = g.seg_emb.row(static_cast<std::size_t>(seg));
            for (std::size_t dd = 0; dd < D; ++dd) {
                gte[dd] += dr[dd];
                gpe[dd] += dr[dd];
                gse[dd] += dr[dd];
            }
        }
    }

    return result;
}

}  // namespace mathrel::model
