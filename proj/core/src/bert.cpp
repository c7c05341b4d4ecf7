#include "xbert/bert.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "xbert/error.hpp"
#include "xbert/vocab.hpp"

namespace xbert {
namespace {

template <typename T>
constexpr T kLayerNormEps = T(1e-12);

// c[m,n] (+)= a[m,k] * b[k,n]. Each output element accumulates over k in
// index order, so a row's result never depends on how many rows there are.
template <typename T>
void matmul(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    T* ci = c + i * n;
    if (!accumulate) std::fill(ci, ci + n, T(0));
    const T* ai = a + i * k;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const T aik = ai[kk];
      const T* bk = b + kk * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
    }
  }
}

template <typename T>
std::vector<T> transpose(const T* a, std::size_t rows, std::size_t cols) {
  std::vector<T> t(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) t[c * rows + r] = a[r * cols + c];
  return t;
}

// y[m,n] = x[m,k] w[k,n] + bias[n]
template <typename T>
void linear(const T* x, const T* w, const T* bias, T* y, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) std::copy(bias, bias + n, y + i * n);
  matmul(x, w, y, m, k, n, true);
}

// dw += x^T dy, db += colsum(dy), dx (+)= dy w^T (skipped when dx is null).
template <typename T>
void linear_backward(const T* x, const T* w, const T* dy, T* dx, T* dw, T* db, std::size_t m, std::size_t k,
                     std::size_t n, bool accumulate_dx) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* xi = x + i * k;
    const T* dyi = dy + i * n;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const T xv = xi[kk];
      T* dwk = dw + kk * n;
      for (std::size_t j = 0; j < n; ++j) dwk[j] += xv * dyi[j];
    }
    for (std::size_t j = 0; j < n; ++j) db[j] += dyi[j];
  }
  if (dx) {
    const auto wt = transpose(w, k, n);
    matmul(dy, wt.data(), dx, m, n, k, accumulate_dx);
  }
}

template <typename T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x * T(0.70710678118654752440)));
}

template <typename T>
T gelu_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x * T(0.70710678118654752440)));
  const T pdf = std::exp(T(-0.5) * x * x) * T(0.39894228040143267794);
  return cdf + x * pdf;
}

template <typename T>
struct NormCache {
  std::vector<T> xhat;
  std::vector<T> rstd;
};

template <typename T>
void layernorm(const T* x, const T* gain, const T* bias, T* y, std::size_t rows, std::size_t h, NormCache<T>& cache) {
  cache.xhat.resize(rows * h);
  cache.rstd.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x + r * h;
    T mean = 0;
    for (std::size_t j = 0; j < h; ++j) mean += xr[j];
    mean /= static_cast<T>(h);
    T var = 0;
    for (std::size_t j = 0; j < h; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<T>(h);
    const T rstd = T(1) / std::sqrt(var + kLayerNormEps<T>);
    cache.rstd[r] = rstd;
    T* xh = cache.xhat.data() + r * h;
    T* yr = y + r * h;
    for (std::size_t j = 0; j < h; ++j) {
      xh[j] = (xr[j] - mean) * rstd;
      yr[j] = xh[j] * gain[j] + bias[j];
    }
  }
}

template <typename T>
void layernorm_backward(const T* dy, const T* gain, const NormCache<T>& cache, T* dx, T* dgain, T* dbias,
                        std::size_t rows, std::size_t h) {
  std::vector<T> dxhat(h);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* dyr = dy + r * h;
    const T* xh = cache.xhat.data() + r * h;
    T m1 = 0;
    T m2 = 0;
    for (std::size_t j = 0; j < h; ++j) {
      dgain[j] += dyr[j] * xh[j];
      dbias[j] += dyr[j];
      dxhat[j] = dyr[j] * gain[j];
      m1 += dxhat[j];
      m2 += dxhat[j] * xh[j];
    }
    m1 /= static_cast<T>(h);
    m2 /= static_cast<T>(h);
    const T rstd = cache.rstd[r];
    T* dxr = dx + r * h;
    for (std::size_t j = 0; j < h; ++j) dxr[j] = rstd * (dxhat[j] - m1 - xh[j] * m2);
  }
}

// Inverted dropout; the returned scale vector is empty when inactive.
template <typename T>
std::vector<T> dropout(std::vector<T>& x, double p, Rng* rng) {
  if (!rng || p <= 0.0) return {};
  std::vector<T> scale(x.size());
  const T keep = static_cast<T>(1.0 / (1.0 - p));
  for (std::size_t i = 0; i < x.size(); ++i) {
    scale[i] = rng->uniform() < p ? T(0) : keep;
    x[i] *= scale[i];
  }
  return scale;
}

template <typename T>
void apply_scale(std::vector<T>& g, const std::vector<T>& scale) {
  if (scale.empty()) return;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= scale[i];
}

template <typename T>
void require_finite(const std::vector<T>& v, const std::string& where) {
  for (T x : v)
    if (!std::isfinite(x)) fail(ErrorCategory::kNumeric, "non-finite activation in " + where);
}

template <typename T>
struct LayerCache {
  std::vector<T> x, q, k, v;
  std::vector<T> probs;       // [batch, heads, seq, seq]
  std::vector<T> probs_drop;  // same, or empty
  std::vector<T> ctx;
  std::vector<T> attn_drop;
  NormCache<T> ln1;
  std::vector<T> a;
  std::vector<T> f1, g;
  std::vector<T> ffn_drop;
  NormCache<T> ln2;
};

}  // namespace

template <typename T>
struct BertPass<T>::State {
  const ParameterSet<T>* params = nullptr;
  ModelConfig cfg;
  Batch batch;
  NormCache<T> emb_ln;
  std::vector<T> emb_drop;
  std::vector<LayerCache<T>> layers;
  std::vector<T> hidden;
  std::vector<T> hm, t1, t2, t3;
  NormCache<T> mlm_ln;
  std::vector<T> cls, pooled;
  bool ready = false;
};

template <typename T>
BertPass<T>::BertPass() : s_(std::make_unique<State>()) {}
template <typename T>
BertPass<T>::~BertPass() = default;
template <typename T>
BertPass<T>::BertPass(BertPass&&) noexcept = default;
template <typename T>
BertPass<T>& BertPass<T>::operator=(BertPass&&) noexcept = default;

template <typename T>
Logits<T> BertPass<T>::forward(const ParameterSet<T>& params, const ModelConfig& cfg, const Batch& batch,
                               bool train_mode, Rng* dropout_rng) {
  cfg.validate();
  State& s = *s_;
  s.params = &params;
  s.cfg = cfg;
  s.batch = batch;
  s.layers.clear();
  Rng* rng = (train_mode && cfg.dropout_prob > 0.0) ? dropout_rng : nullptr;
  const double p_drop = cfg.dropout_prob;

  const std::size_t B = batch.batch_size, S = batch.seq_len, P = batch.max_predictions;
  const std::size_t H = cfg.hidden_size, A = cfg.num_heads, D = H / A, I = cfg.intermediate_size;
  const std::size_t V = cfg.vocab_size, N = B * S, M = B * P;
  if (S > cfg.max_positions)
    fail(ErrorCategory::kData, "sequence length " + std::to_string(S) + " exceeds max positions " +
                                   std::to_string(cfg.max_positions));
  if (batch.token_ids.size() != N || batch.segment_ids.size() != N || batch.attention_mask.size() != N ||
      batch.masked_positions.size() != M || batch.nsp_labels.size() != B)
    fail(ErrorCategory::kData, "batch arrays disagree with declared shape");

  const auto& tok = params.at(param_names::kTokenEmbeddings).data;
  const auto& pos = params.at(param_names::kPositionEmbeddings).data;
  const auto& seg = params.at(param_names::kSegmentEmbeddings).data;

  std::vector<T> emb(N * H);
  for (std::size_t n = 0; n < N; ++n) {
    const TokenId id = batch.token_ids[n];
    if (id < 0 || static_cast<std::size_t>(id) >= V)
      fail(ErrorCategory::kData, "token id " + std::to_string(id) + " out of range for vocab size " + std::to_string(V));
    const std::size_t sg = batch.segment_ids[n];
    if (sg >= cfg.type_vocab_size) fail(ErrorCategory::kData, "segment id out of range");
    const T* te = tok.data() + static_cast<std::size_t>(id) * H;
    const T* pe = pos.data() + (n % S) * H;
    const T* se = seg.data() + sg * H;
    T* e = emb.data() + n * H;
    for (std::size_t j = 0; j < H; ++j) e[j] = te[j] + pe[j] + se[j];
  }
  std::vector<T> x(N * H);
  layernorm(emb.data(), params.at("embeddings.ln.gain").data.data(), params.at("embeddings.ln.bias").data.data(),
            x.data(), N, H, s.emb_ln);
  s.emb_drop = dropout(x, p_drop, rng);
  require_finite(x, "embeddings");

  const T scale = T(1) / std::sqrt(static_cast<T>(D));
  const T neg_inf = -std::numeric_limits<T>::infinity();
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    auto W = [&](const char* leaf) { return params.at(param_names::layer(l, leaf)).data.data(); };
    LayerCache<T>& c = s.layers.emplace_back();
    c.x = std::move(x);
    c.q.resize(N * H);
    c.k.resize(N * H);
    c.v.resize(N * H);
    linear(c.x.data(), W("attention.query.weight"), W("attention.query.bias"), c.q.data(), N, H, H);
    linear(c.x.data(), W("attention.key.weight"), W("attention.key.bias"), c.k.data(), N, H, H);
    linear(c.x.data(), W("attention.value.weight"), W("attention.value.bias"), c.v.data(), N, H, H);

    c.probs.assign(B * A * S * S, T(0));
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t h = 0; h < A; ++h) {
        for (std::size_t i = 0; i < S; ++i) {
          T* row = c.probs.data() + ((b * A + h) * S + i) * S;
          const T* qi = c.q.data() + (b * S + i) * H + h * D;
          T mx = neg_inf;
          for (std::size_t j = 0; j < S; ++j) {
            if (!batch.attention_mask[b * S + j]) {
              row[j] = neg_inf;
              continue;
            }
            const T* kj = c.k.data() + (b * S + j) * H + h * D;
            T dot = 0;
            for (std::size_t d = 0; d < D; ++d) dot += qi[d] * kj[d];
            row[j] = dot * scale;
            mx = std::max(mx, row[j]);
          }
          if (mx == neg_inf) {
            std::fill(row, row + S, T(0));
            continue;
          }
          T sum = 0;
          for (std::size_t j = 0; j < S; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
          }
          for (std::size_t j = 0; j < S; ++j) row[j] /= sum;
        }
      }
    }
    std::vector<T> pd = c.probs;
    c.probs_drop = dropout(pd, p_drop, rng);
    c.ctx.assign(N * H, T(0));
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t h = 0; h < A; ++h)
        for (std::size_t i = 0; i < S; ++i) {
          const T* row = pd.data() + ((b * A + h) * S + i) * S;
          T* out = c.ctx.data() + (b * S + i) * H + h * D;
          for (std::size_t j = 0; j < S; ++j) {
            const T pij = row[j];
            const T* vj = c.v.data() + (b * S + j) * H + h * D;
            for (std::size_t d = 0; d < D; ++d) out[d] += pij * vj[d];
          }
        }

    std::vector<T> ao(N * H);
    linear(c.ctx.data(), W("attention.output.weight"), W("attention.output.bias"), ao.data(), N, H, H);
    c.attn_drop = dropout(ao, p_drop, rng);
    for (std::size_t i = 0; i < N * H; ++i) ao[i] += c.x[i];
    c.a.resize(N * H);
    layernorm(ao.data(), W("attention.ln.gain"), W("attention.ln.bias"), c.a.data(), N, H, c.ln1);

    c.f1.resize(N * I);
    linear(c.a.data(), W("ffn.in.weight"), W("ffn.in.bias"), c.f1.data(), N, H, I);
    c.g.resize(N * I);
    for (std::size_t i = 0; i < N * I; ++i) c.g[i] = gelu(c.f1[i]);
    std::vector<T> f2(N * H);
    linear(c.g.data(), W("ffn.out.weight"), W("ffn.out.bias"), f2.data(), N, I, H);
    c.ffn_drop = dropout(f2, p_drop, rng);
    for (std::size_t i = 0; i < N * H; ++i) f2[i] += c.a[i];
    x.resize(N * H);
    layernorm(f2.data(), W("output.ln.gain"), W("output.ln.bias"), x.data(), N, H, c.ln2);
    require_finite(x, "encoder layer " + std::to_string(l));
  }
  s.hidden = std::move(x);

  // MLM head on the gathered prediction slots.
  s.hm.resize(M * H);
  for (std::size_t m = 0; m < M; ++m) {
    const auto p = static_cast<std::size_t>(batch.masked_positions[m]);
    if (p >= S) fail(ErrorCategory::kData, "masked position out of range");
    const T* src = s.hidden.data() + ((m / P) * S + p) * H;
    std::copy(src, src + H, s.hm.data() + m * H);
  }
  s.t1.resize(M * H);
  linear(s.hm.data(), params.at("mlm.transform.weight").data.data(), params.at("mlm.transform.bias").data.data(),
         s.t1.data(), M, H, H);
  s.t2.resize(M * H);
  for (std::size_t i = 0; i < M * H; ++i) s.t2[i] = gelu(s.t1[i]);
  s.t3.resize(M * H);
  layernorm(s.t2.data(), params.at("mlm.ln.gain").data.data(), params.at("mlm.ln.bias").data.data(), s.t3.data(), M,
            H, s.mlm_ln);
  Logits<T> out;
  out.mlm = Tensor<T>(Shape{B, P, V});
  {
    const auto tok_t = transpose(tok.data(), V, H);
    linear(s.t3.data(), tok_t.data(), params.at(param_names::kMlmOutputBias).data.data(), out.mlm.data.data(), M, H, V);
  }
  require_finite(out.mlm.data, "mlm head");

  s.cls.resize(B * H);
  for (std::size_t b = 0; b < B; ++b)
    std::copy(s.hidden.data() + b * S * H, s.hidden.data() + b * S * H + H, s.cls.data() + b * H);
  s.pooled.resize(B * H);
  linear(s.cls.data(), params.at("pooler.weight").data.data(), params.at("pooler.bias").data.data(), s.pooled.data(),
         B, H, H);
  for (auto& v : s.pooled) v = std::tanh(v);
  out.nsp = Tensor<T>(Shape{B, 2});
  linear(s.pooled.data(), params.at("nsp.weight").data.data(), params.at("nsp.bias").data.data(), out.nsp.data.data(),
         B, H, 2);
  require_finite(out.nsp.data, "nsp head");
  s.ready = true;
  return out;
}

template <typename T>
ParameterSet<T> BertPass<T>::backward(const Tensor<T>& d_mlm, const Tensor<T>& d_nsp) {
  State& s = *s_;
  if (!s.ready) fail(ErrorCategory::kInternal, "backward() without a preceding forward()");
  s.ready = false;
  const ParameterSet<T>& params = *s.params;
  const ModelConfig& cfg = s.cfg;
  const Batch& batch = s.batch;
  const std::size_t B = batch.batch_size, S = batch.seq_len, P = batch.max_predictions;
  const std::size_t H = cfg.hidden_size, A = cfg.num_heads, D = H / A, I = cfg.intermediate_size;
  const std::size_t V = cfg.vocab_size, N = B * S, M = B * P;
  if (d_mlm.size() != M * V || d_nsp.size() != B * 2) fail(ErrorCategory::kInternal, "logit gradient shape mismatch");

  ParameterSet<T> grads = params.zeros_like();
  auto G = [&](const std::string& name) { return grads.at(name).data.data(); };
  auto Pm = [&](const std::string& name) { return params.at(name).data.data(); };
  std::vector<T> dhidden(N * H, T(0));

  // MLM head.
  {
    const T* dl = d_mlm.data.data();
    T* dob = G(param_names::kMlmOutputBias);
    T* dtok = G(param_names::kTokenEmbeddings);
    const T* tok = Pm(param_names::kTokenEmbeddings);
    std::vector<T> dt3(M * H, T(0));
    for (std::size_t m = 0; m < M; ++m) {
      const T* dlm = dl + m * V;
      const T* t3m = s.t3.data() + m * H;
      T* dt3m = dt3.data() + m * H;
      for (std::size_t v = 0; v < V; ++v) {
        const T coef = dlm[v];
        if (coef == T(0)) continue;
        dob[v] += coef;
        T* dtv = dtok + v * H;
        const T* tv = tok + v * H;
        for (std::size_t j = 0; j < H; ++j) {
          dtv[j] += coef * t3m[j];
          dt3m[j] += coef * tv[j];
        }
      }
    }
    std::vector<T> dt2(M * H);
    layernorm_backward(dt3.data(), Pm("mlm.ln.gain"), s.mlm_ln, dt2.data(), G("mlm.ln.gain"), G("mlm.ln.bias"), M, H);
    for (std::size_t i = 0; i < M * H; ++i) dt2[i] *= gelu_grad(s.t1[i]);
    std::vector<T> dhm(M * H);
    linear_backward(s.hm.data(), Pm("mlm.transform.weight"), dt2.data(), dhm.data(), G("mlm.transform.weight"),
                    G("mlm.transform.bias"), M, H, H, false);
    for (std::size_t m = 0; m < M; ++m) {
      const auto p = static_cast<std::size_t>(batch.masked_positions[m]);
      T* dst = dhidden.data() + ((m / P) * S + p) * H;
      const T* src = dhm.data() + m * H;
      for (std::size_t j = 0; j < H; ++j) dst[j] += src[j];
    }
  }

  // NSP head.
  {
    std::vector<T> dpooled(B * H);
    linear_backward(s.pooled.data(), Pm("nsp.weight"), d_nsp.data.data(), dpooled.data(), G("nsp.weight"),
                    G("nsp.bias"), B, H, 2, false);
    for (std::size_t i = 0; i < B * H; ++i) dpooled[i] *= T(1) - s.pooled[i] * s.pooled[i];
    std::vector<T> dcls(B * H);
    linear_backward(s.cls.data(), Pm("pooler.weight"), dpooled.data(), dcls.data(), G("pooler.weight"),
                    G("pooler.bias"), B, H, H, false);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t j = 0; j < H; ++j) dhidden[b * S * H + j] += dcls[b * H + j];
  }

  const T scale = T(1) / std::sqrt(static_cast<T>(D));
  std::vector<T> dx = std::move(dhidden);
  for (std::size_t li = cfg.num_layers; li-- > 0;) {
    const LayerCache<T>& c = s.layers[li];
    auto W = [&](const char* leaf) { return Pm(param_names::layer(li, leaf)); };
    auto GW = [&](const char* leaf) { return G(param_names::layer(li, leaf)); };

    std::vector<T> dr2(N * H);
    layernorm_backward(dx.data(), W("output.ln.gain"), c.ln2, dr2.data(), GW("output.ln.gain"), GW("output.ln.bias"),
                       N, H);
    std::vector<T> da = dr2;
    apply_scale(dr2, c.ffn_drop);
    std::vector<T> dg(N * I);
    linear_backward(c.g.data(), W("ffn.out.weight"), dr2.data(), dg.data(), GW("ffn.out.weight"), GW("ffn.out.bias"),
                    N, I, H, false);
    for (std::size_t i = 0; i < N * I; ++i) dg[i] *= gelu_grad(c.f1[i]);
    linear_backward(c.a.data(), W("ffn.in.weight"), dg.data(), da.data(), GW("ffn.in.weight"), GW("ffn.in.bias"), N,
                    H, I, true);

    std::vector<T> dr1(N * H);
    layernorm_backward(da.data(), W("attention.ln.gain"), c.ln1, dr1.data(), GW("attention.ln.gain"),
                       GW("attention.ln.bias"), N, H);
    std::vector<T> dxl = dr1;
    apply_scale(dr1, c.attn_drop);
    std::vector<T> dctx(N * H);
    linear_backward(c.ctx.data(), W("attention.output.weight"), dr1.data(), dctx.data(), GW("attention.output.weight"),
                    GW("attention.output.bias"), N, H, H, false);

    std::vector<T> dq(N * H, T(0)), dk(N * H, T(0)), dv(N * H, T(0));
    std::vector<T> dp(S);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t h = 0; h < A; ++h)
        for (std::size_t i = 0; i < S; ++i) {
          const std::size_t row_off = ((b * A + h) * S + i) * S;
          const T* prob = c.probs.data() + row_off;
          const T* pdrop = c.probs_drop.empty() ? nullptr : c.probs_drop.data() + row_off;
          const T* dci = dctx.data() + (b * S + i) * H + h * D;
          T dot = 0;
          for (std::size_t j = 0; j < S; ++j) {
            const T keep = pdrop ? pdrop[j] : T(1);
            const T pd = prob[j] * keep;
            const T* vj = c.v.data() + (b * S + j) * H + h * D;
            T* dvj = dv.data() + (b * S + j) * H + h * D;
            T g = 0;
            for (std::size_t d = 0; d < D; ++d) {
              g += dci[d] * vj[d];
              dvj[d] += pd * dci[d];
            }
            dp[j] = g * keep;
            dot += prob[j] * dp[j];
          }
          const T* qi = c.q.data() + (b * S + i) * H + h * D;
          T* dqi = dq.data() + (b * S + i) * H + h * D;
          for (std::size_t j = 0; j < S; ++j) {
            if (prob[j] == T(0)) continue;
            const T ds = prob[j] * (dp[j] - dot) * scale;
            const T* kj = c.k.data() + (b * S + j) * H + h * D;
            T* dkj = dk.data() + (b * S + j) * H + h * D;
            for (std::size_t d = 0; d < D; ++d) {
              dqi[d] += ds * kj[d];
              dkj[d] += ds * qi[d];
            }
          }
        }
    linear_backward(c.x.data(), W("attention.query.weight"), dq.data(), dxl.data(), GW("attention.query.weight"),
                    GW("attention.query.bias"), N, H, H, true);
    linear_backward(c.x.data(), W("attention.key.weight"), dk.data(), dxl.data(), GW("attention.key.weight"),
                    GW("attention.key.bias"), N, H, H, true);
    linear_backward(c.x.data(), W("attention.value.weight"), dv.data(), dxl.data(), GW("attention.value.weight"),
                    GW("attention.value.bias"), N, H, H, true);
    dx = std::move(dxl);
  }

  apply_scale(dx, s.emb_drop);
  std::vector<T> demb(N * H);
  layernorm_backward(dx.data(), Pm("embeddings.ln.gain"), s.emb_ln, demb.data(), G("embeddings.ln.gain"),
                     G("embeddings.ln.bias"), N, H);
  T* dtok = G(param_names::kTokenEmbeddings);
  T* dpos = G(param_names::kPositionEmbeddings);
  T* dseg = G(param_names::kSegmentEmbeddings);
  for (std::size_t n = 0; n < N; ++n) {
    const T* src = demb.data() + n * H;
    T* t = dtok + static_cast<std::size_t>(batch.token_ids[n]) * H;
    T* p = dpos + (n % S) * H;
    T* g = dseg + static_cast<std::size_t>(batch.segment_ids[n]) * H;
    for (std::size_t j = 0; j < H; ++j) {
      t[j] += src[j];
      p[j] += src[j];
      g[j] += src[j];
    }
  }
  for (const auto& [name, t] : grads)
    for (T v : t.data)
      if (!std::isfinite(v)) fail(ErrorCategory::kNumeric, "non-finite gradient for " + name);
  return grads;
}

template <typename T>
LossWithGrad<T> loss(const Logits<T>& logits, const Batch& batch) {
  const std::size_t B = batch.batch_size, P = batch.max_predictions;
  if (logits.mlm.shape.size() != 3 || logits.mlm.shape[0] != B || logits.mlm.shape[1] != P || logits.nsp.size() != B * 2)
    fail(ErrorCategory::kInternal, "logit shapes disagree with the batch");
  const std::size_t V = logits.mlm.shape[2];
  LossWithGrad<T> out;
  out.d_mlm = Tensor<T>(logits.mlm.shape);
  out.d_nsp = Tensor<T>(logits.nsp.shape);

  const std::size_t real = batch.real_predictions();
  if (real > 0) {
    const T inv = T(1) / static_cast<T>(real);
    T total = 0;
    for (std::size_t m = 0; m < B * P; ++m) {
      if (!batch.masked_weights[m]) continue;
      const T* row = logits.mlm.data.data() + m * V;
      T* grow = out.d_mlm.data.data() + m * V;
      const T mx = *std::max_element(row, row + V);
      T sum = 0;
      for (std::size_t v = 0; v < V; ++v) sum += std::exp(row[v] - mx);
      const T lse = mx + std::log(sum);
      const auto label = static_cast<std::size_t>(batch.masked_labels[m]);
      total += lse - row[label];
      for (std::size_t v = 0; v < V; ++v) grow[v] = std::exp(row[v] - lse) * inv;
      grow[label] -= inv;
    }
    out.value.mlm = total * inv;
  }
  {
    const T inv = T(1) / static_cast<T>(B);
    T total = 0;
    for (std::size_t b = 0; b < B; ++b) {
      const T* row = logits.nsp.data.data() + b * 2;
      T* grow = out.d_nsp.data.data() + b * 2;
      const T mx = std::max(row[0], row[1]);
      const T lse = mx + std::log(std::exp(row[0] - mx) + std::exp(row[1] - mx));
      const auto label = static_cast<std::size_t>(batch.nsp_labels[b]);
      total += lse - row[label];
      for (std::size_t c = 0; c < 2; ++c) grow[c] = std::exp(row[c] - lse) * inv;
      grow[label] -= inv;
    }
    out.value.nsp = total * inv;
  }
  out.value.total = out.value.mlm + out.value.nsp;
  return out;
}

template <typename T>
TrainingSignal<T> loss_and_gradients(const ParameterSet<T>& params, const ModelConfig& cfg, const Batch& batch,
                                     bool train_mode, Rng* dropout_rng) {
  BertPass<T> pass;
  const auto logits = pass.forward(params, cfg, batch, train_mode, dropout_rng);
  auto l = loss(logits, batch);
  if (!std::isfinite(l.value.total)) fail(ErrorCategory::kNumeric, "non-finite loss");
  return {l.value, pass.backward(l.d_mlm, l.d_nsp)};
}

template <typename T>
ParameterSet<T> init_parameters(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ParameterSet<T> params;
  std::uint64_t index = 0;
  for (auto& [name, shape] : parameter_inventory(cfg)) {
    Tensor<T> t(shape);
    if (is_layernorm_gain(name)) {
      std::fill(t.data.begin(), t.data.end(), T(1));
    } else if (!is_no_decay(name)) {
      Rng rng = Rng::derive(seed, index, 11);
      for (auto& v : t.data) v = static_cast<T>(truncated_normal(rng, 0.02));
    }
    params.add(name, std::move(t));
    ++index;
  }
  return params;
}

Batch random_batch(const ModelConfig& cfg, std::size_t batch_size, std::size_t seq_len, std::size_t max_predictions,
                   std::uint64_t seed) {
  if (seq_len < 5 || seq_len > cfg.max_positions) fail(ErrorCategory::kConfig, "bad sequence length for random batch");
  Rng rng(seed);
  std::vector<PretrainingInstance> rows;
  const auto content = static_cast<std::uint64_t>(cfg.vocab_size - kNumSpecial);
  for (std::size_t b = 0; b < batch_size; ++b) {
    PretrainingInstance inst;
    const std::size_t used = seq_len - static_cast<std::size_t>(rng.below((seq_len - 5) / 3 + 1));
    const std::size_t sep1 = 2 + static_cast<std::size_t>(rng.below(used - 4));
    inst.token_ids.assign(seq_len, kPadId);
    inst.segment_ids.assign(seq_len, 0);
    inst.attention_mask.assign(seq_len, 0);
    for (std::size_t i = 0; i < used; ++i) {
      inst.attention_mask[i] = 1;
      if (i == 0) {
        inst.token_ids[i] = kClsId;
      } else if (i == sep1 || i + 1 == used) {
        inst.token_ids[i] = kSepId;
      } else {
        inst.token_ids[i] = content ? kNumSpecial + static_cast<TokenId>(rng.below(content)) : kUnkId;
      }
      if (i > sep1) inst.segment_ids[i] = 1;
    }
    std::vector<std::int32_t> cand;
    for (std::size_t i = 1; i + 1 < used; ++i)
      if (i != sep1) cand.push_back(static_cast<std::int32_t>(i));
    rng.shuffle(std::span<std::int32_t>(cand));
    const std::size_t k = std::min(cand.size(), 1 + static_cast<std::size_t>(rng.below(max_predictions)));
    cand.resize(k);
    std::sort(cand.begin(), cand.end());
    for (auto p : cand) {
      inst.masked_positions.push_back(p);
      inst.masked_labels.push_back(inst.token_ids[static_cast<std::size_t>(p)]);
      inst.token_ids[static_cast<std::size_t>(p)] = kMaskId;
    }
    inst.is_random_next = rng.bernoulli(0.5);
    rows.push_back(std::move(inst));
  }
  return make_batch(std::span<const PretrainingInstance>(rows), max_predictions);
}

GradientCheckResult gradient_check(ModelConfig cfg, std::uint64_t seed, double epsilon, std::size_t samples_per_tensor,
                                   double floor) {
  cfg.dropout_prob = 0.0;
  cfg.validate();
  auto params = init_parameters<double>(cfg, seed);
  const Batch batch = random_batch(cfg, 2, std::min<std::size_t>(16, cfg.max_positions), 3, mix64(seed + 1));
  const auto analytic = loss_and_gradients(params, cfg, batch, false, nullptr);

  auto total_loss = [&] { return loss(forward(params, cfg, batch), batch).value.total; };

  GradientCheckResult result;
  std::uint64_t tensor_index = 0;
  for (auto& [name, tensor] : params) {
    const auto& g = analytic.grads.at(name).data;
    std::vector<std::size_t> idx;
    if (tensor.size() <= samples_per_tensor) {
      for (std::size_t i = 0; i < tensor.size(); ++i) idx.push_back(i);
    } else {
      Rng rng = Rng::derive(seed, tensor_index, 29);
      for (std::size_t i = 0; i < samples_per_tensor; ++i) idx.push_back(static_cast<std::size_t>(rng.below(tensor.size())));
    }
    for (std::size_t i : idx) {
      const double orig = tensor.data[i];
      tensor.data[i] = orig + epsilon;
      const double up = total_loss();
      tensor.data[i] = orig - epsilon;
      const double down = total_loss();
      tensor.data[i] = orig;
      const double numeric = (up - down) / (2.0 * epsilon);
      if (!std::isfinite(numeric) || !std::isfinite(g[i]))
        fail(ErrorCategory::kNumeric, "non-finite gradient while checking " + name);
      const double denom = std::max({std::abs(g[i]), std::abs(numeric), floor});
      const double rel = std::abs(g[i] - numeric) / denom;
      if (result.worst_parameter.empty() || rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_parameter = name + "[" + std::to_string(i) + "]";
        result.worst_analytic = g[i];
        result.worst_numeric = numeric;
      }
      ++result.checked_entries;
    }
    ++tensor_index;
  }
  return result;
}

template class BertPass<float>;
template class BertPass<double>;
template LossWithGrad<float> loss(const Logits<float>&, const Batch&);
template LossWithGrad<double> loss(const Logits<double>&, const Batch&);
template TrainingSignal<float> loss_and_gradients(const ParameterSet<float>&, const ModelConfig&, const Batch&, bool,
                                                  Rng*);
template TrainingSignal<double> loss_and_gradients(const ParameterSet<double>&, const ModelConfig&, const Batch&, bool,
                                                   Rng*);
template ParameterSet<float> init_parameters(const ModelConfig&, std::uint64_t);
template ParameterSet<double> init_parameters(const ModelConfig&, std::uint64_t);

}  // namespace xbert
