#pragma once

// Gated autoregressive model: symbol embedding -> one LSTM layer -> four
// dense layers -> softmax over the symbol alphabet. Every scalar parameter
// theta_i has a gate logit z_i, and the network only ever sees the effective
// parameter g_i * theta_i with g_i = sigmoid(z_i).
//
// Everything is templated on the scalar type; training uses double, the
// finite-difference tests instantiate long double.

#include "cbound/errors.hpp"
#include "cbound/preprocess.hpp"
#include "cbound/rng.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

namespace cbound {

inline constexpr int kVocab = 100;

struct Architecture {
    int d_in = 8;                      ///< embedding width
    int width = 16;                    ///< LSTM hidden width
    std::array<int, 4> ff{16, 16, 8, kVocab};
    int horizon = 8;                   ///< BPTT unroll length h
    int vocab = kVocab;

    /// Throws ConfigError on non-positive widths or ff[3] != vocab.
    void validate() const;
    std::size_t parameter_count() const;
    friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Default head [w, w, w/2, vocab].
inline Architecture make_architecture(int d_in, int width, int horizon) {
    Architecture a;
    a.d_in = d_in;
    a.width = width;
    a.ff = {width, width, std::max(1, width / 2), kVocab};
    a.horizon = horizon;
    return a;
}

/// Offsets of each parameter block inside the flat parameter vector. Matrices
/// are column-major; the embedding is d_in x vocab so a symbol's vector is a
/// contiguous column.
struct ParamLayout {
    struct Block {
        std::size_t offset = 0;
        int rows = 0;
        int cols = 1;
        std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
    };

    Block embed, lstm_w, lstm_u, lstm_b;
    std::array<Block, 4> dense_w, dense_b;
    std::size_t total = 0;

    explicit ParamLayout(const Architecture& a) {
        auto take = [this](int rows, int cols) {
            Block b{total, rows, cols};
            total += b.size();
            return b;
        };
        embed = take(a.d_in, a.vocab);
        lstm_w = take(4 * a.width, a.d_in);
        lstm_u = take(4 * a.width, a.width);
        lstm_b = take(4 * a.width, 1);
        int fan_in = a.width;
        for (int l = 0; l < 4; ++l) {
            dense_w[l] = take(a.ff[l], fan_in);
            dense_b[l] = take(a.ff[l], 1);
            fan_in = a.ff[l];
        }
    }
};

inline void Architecture::validate() const {
    if (d_in < 1 || width < 1 || horizon < 1 || vocab < 2)
        throw ConfigError("architecture widths and horizon must be >= 1");
    for (int f : ff)
        if (f < 1) throw ConfigError("feed-forward widths must be >= 1");
    if (ff[3] != vocab) throw ConfigError("ff_widths[3] must equal the 100-symbol vocabulary");
}

inline std::size_t Architecture::parameter_count() const { return ParamLayout(*this).total; }

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
struct LstmState {
    VectorX<Scalar> h;
    VectorX<Scalar> c;

    static LstmState zero(int width) {
        return {VectorX<Scalar>::Zero(width), VectorX<Scalar>::Zero(width)};
    }
};

template <typename Scalar>
Scalar logistic(Scalar x) {
    using std::exp;
    return x >= Scalar(0) ? Scalar(1) / (Scalar(1) + exp(-x)) : exp(x) / (Scalar(1) + exp(x));
}

template <typename Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& x) {
    using S = typename Derived::Scalar;
    return x.unaryExpr([](S v) { return logistic<S>(v); });
}

template <typename Scalar = double>
struct GatedModel {
    Architecture arch;
    VectorX<Scalar> theta;
    VectorX<Scalar> z;
    std::uint64_t seed = 0;

    VectorX<Scalar> gates() const { return sigmoid(z).eval(); }
    VectorX<Scalar> effective() const { return gates().cwiseProduct(theta); }

    template <typename Other>
    GatedModel<Other> cast() const {
        return {arch, theta.template cast<Other>(), z.template cast<Other>(), seed};
    }
};

/// A snapshot with gates below g_min forced to zero. Parameters whose gate
/// survives keep exactly the base model's effective value.
template <typename Scalar = double>
struct PrunedModel {
    GatedModel<Scalar> base;
    Scalar g_min = Scalar(0);
    std::vector<bool> mask;

    VectorX<Scalar> effective() const {
        VectorX<Scalar> g = base.gates();
        for (Eigen::Index i = 0; i < g.size(); ++i)
            if (!mask[static_cast<std::size_t>(i)]) g[i] = Scalar(0);
        return g.cwiseProduct(base.theta);
    }
};

/// Deterministic init: fan-in scaled uniform weights and biases, all gate
/// logits at logit(0.95).
inline GatedModel<double> init_model(const Architecture& arch, std::uint64_t seed) {
    arch.validate();
    const ParamLayout layout(arch);
    GatedModel<double> m;
    m.arch = arch;
    m.seed = seed;
    m.theta.resize(static_cast<Eigen::Index>(layout.total));
    m.z = VectorX<double>::Constant(static_cast<Eigen::Index>(layout.total), std::log(0.95 / 0.05));

    auto eng = rng::make_engine(seed, 0x5eedu);
    auto fill = [&](const ParamLayout::Block& b, double scale) {
        for (std::size_t i = 0; i < b.size(); ++i)
            m.theta[static_cast<Eigen::Index>(b.offset + i)] = rng::uniform(eng, -scale, scale);
    };
    fill(layout.embed, 1.0);
    const double lstm_scale = 1.0 / std::sqrt(static_cast<double>(arch.width));
    fill(layout.lstm_w, lstm_scale);
    fill(layout.lstm_u, lstm_scale);
    fill(layout.lstm_b, lstm_scale);
    int fan_in = arch.width;
    for (int l = 0; l < 4; ++l) {
        const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
        fill(layout.dense_w[l], s);
        fill(layout.dense_b[l], s);
        fan_in = arch.ff[l];
    }
    return m;
}

inline GatedModel<double> init_model(int d_in, int width, std::array<int, 4> ff, int horizon,
                                     std::uint64_t seed) {
    Architecture a;
    a.d_in = d_in;
    a.width = width;
    a.ff = ff;
    a.horizon = horizon;
    return init_model(a, seed);
}

namespace detail {

template <typename Scalar>
struct ConstViews {
    using Mat = Eigen::Map<const MatrixX<Scalar>>;
    using Vec = Eigen::Map<const VectorX<Scalar>>;

    Mat embed, w, u;
    Vec b;
    std::array<Mat, 4> dw;
    std::array<Vec, 4> db;

    static Mat mat(const Scalar* p, const ParamLayout::Block& bl) {
        return Mat(p + bl.offset, bl.rows, bl.cols);
    }
    static Vec vec(const Scalar* p, const ParamLayout::Block& bl) {
        return Vec(p + bl.offset, bl.rows);
    }

    ConstViews(const ParamLayout& l, const Scalar* p)
        : embed(mat(p, l.embed)), w(mat(p, l.lstm_w)), u(mat(p, l.lstm_u)), b(vec(p, l.lstm_b)),
          dw{mat(p, l.dense_w[0]), mat(p, l.dense_w[1]), mat(p, l.dense_w[2]), mat(p, l.dense_w[3])},
          db{vec(p, l.dense_b[0]), vec(p, l.dense_b[1]), vec(p, l.dense_b[2]), vec(p, l.dense_b[3])} {}
};

template <typename Scalar>
struct MutViews {
    using Mat = Eigen::Map<MatrixX<Scalar>>;
    using Vec = Eigen::Map<VectorX<Scalar>>;

    Mat embed, w, u;
    Vec b;
    std::array<Mat, 4> dw;
    std::array<Vec, 4> db;

    static Mat mat(Scalar* p, const ParamLayout::Block& bl) { return Mat(p + bl.offset, bl.rows, bl.cols); }
    static Vec vec(Scalar* p, const ParamLayout::Block& bl) { return Vec(p + bl.offset, bl.rows); }

    MutViews(const ParamLayout& l, Scalar* p)
        : embed(mat(p, l.embed)), w(mat(p, l.lstm_w)), u(mat(p, l.lstm_u)), b(vec(p, l.lstm_b)),
          dw{mat(p, l.dense_w[0]), mat(p, l.dense_w[1]), mat(p, l.dense_w[2]), mat(p, l.dense_w[3])},
          db{vec(p, l.dense_b[0]), vec(p, l.dense_b[1]), vec(p, l.dense_b[2]), vec(p, l.dense_b[3])} {}
};

/// Everything one time step keeps for the backward pass.
template <typename Scalar>
struct StepCache {
    Symbol input = 0;
    VectorX<Scalar> h_prev, c_prev;
    VectorX<Scalar> i, f, g, o;
    VectorX<Scalar> c, tanh_c, h;
    std::array<VectorX<Scalar>, 3> act;  // tanh outputs of dense layers 0..2
    VectorX<Scalar> prob;
};

template <typename Scalar>
void softmax_inplace(VectorX<Scalar>& v) {
    using std::exp;
    const Scalar mx = v.maxCoeff();
    v = (v.array() - mx).unaryExpr([](Scalar x) { return exp(x); }).matrix();
    v /= v.sum();
}

inline void check_symbol(Symbol s, int vocab) {
    if (s < 0 || s >= vocab)
        throw InputError("symbol " + std::to_string(s) + " outside [0, " + std::to_string(vocab - 1) + "]");
}

/// One step of the network. Fills `cache` (when non-null) and returns the
/// next-symbol distribution.
template <typename Scalar>
VectorX<Scalar> step(const Architecture& a, const ConstViews<Scalar>& p, Symbol input,
                     LstmState<Scalar>& state, StepCache<Scalar>* cache) {
    using std::tanh;
    check_symbol(input, a.vocab);
    const int w = a.width;
    const VectorX<Scalar> pre = p.w * p.embed.col(input) + p.u * state.h + p.b;
    VectorX<Scalar> i = sigmoid(pre.segment(0, w));
    VectorX<Scalar> f = sigmoid(pre.segment(w, w));
    VectorX<Scalar> g = pre.segment(2 * w, w).array().tanh().matrix();
    VectorX<Scalar> o = sigmoid(pre.segment(3 * w, w));
    VectorX<Scalar> c = f.cwiseProduct(state.c) + i.cwiseProduct(g);
    VectorX<Scalar> tanh_c = c.array().tanh().matrix();
    VectorX<Scalar> h = o.cwiseProduct(tanh_c);

    std::array<VectorX<Scalar>, 3> act;
    const VectorX<Scalar>* x = &h;
    for (int l = 0; l < 3; ++l) {
        act[l] = (p.dw[l] * *x + p.db[l]).array().tanh().matrix();
        x = &act[l];
    }
    VectorX<Scalar> prob = p.dw[3] * *x + p.db[3];
    softmax_inplace(prob);

    if (cache) {
        cache->input = input;
        cache->h_prev = state.h;
        cache->c_prev = state.c;
        cache->i = std::move(i);
        cache->f = std::move(f);
        cache->g = std::move(g);
        cache->o = std::move(o);
        cache->c = c;
        cache->tanh_c = std::move(tanh_c);
        cache->h = h;
        cache->act = std::move(act);
        cache->prob = prob;
    }
    state.h = std::move(h);
    state.c = std::move(c);
    return prob;
}

}  // namespace detail

template <typename Scalar>
struct ForwardResult {
    VectorX<Scalar> prob;
    LstmState<Scalar> state;
};

/// Distribution of the symbol following `context`, from `initial` state,
/// evaluated with the given effective parameters.
template <typename Scalar>
ForwardResult<Scalar> forward_effective(const Architecture& arch, const VectorX<Scalar>& effective,
                                        std::span<const Symbol> context, LstmState<Scalar> initial) {
    if (context.empty()) throw InputError("forward: context must contain at least one symbol");
    if (context.size() > static_cast<std::size_t>(arch.horizon))
        throw InputError("forward: context longer than the unroll horizon");
    const ParamLayout layout(arch);
    const detail::ConstViews<Scalar> p(layout, effective.data());
    VectorX<Scalar> prob;
    for (Symbol s : context) prob = detail::step(arch, p, s, initial, static_cast<detail::StepCache<Scalar>*>(nullptr));
    return {std::move(prob), std::move(initial)};
}

template <typename Scalar>
const Architecture& model_arch(const GatedModel<Scalar>& m) { return m.arch; }
template <typename Scalar>
const Architecture& model_arch(const PrunedModel<Scalar>& m) { return m.base.arch; }

template <typename Scalar>
ForwardResult<Scalar> forward(const GatedModel<Scalar>& model, std::span<const Symbol> context,
                              LstmState<Scalar> initial) {
    return forward_effective(model.arch, model.effective(), context, std::move(initial));
}

template <typename Scalar>
ForwardResult<Scalar> forward(const PrunedModel<Scalar>& model, std::span<const Symbol> context,
                              LstmState<Scalar> initial) {
    return forward_effective(model.base.arch, model.effective(), context, std::move(initial));
}

/// Per-position log-likelihood (natural log) over `seq`, with the recurrent
/// state reset at the start of each segment. The first position of every
/// segment has no prediction and carries 0.
template <typename Scalar>
std::vector<Scalar> step_log_likelihoods_effective(const Architecture& arch,
                                                   const VectorX<Scalar>& effective,
                                                   std::span<const Symbol> seq,
                                                   std::span<const Range> segments) {
    using std::log;
    const ParamLayout layout(arch);
    const detail::ConstViews<Scalar> p(layout, effective.data());
    std::vector<Scalar> out(seq.size(), Scalar(0));
    for (const Range& r : segments) {
        if (r.end > seq.size() || r.begin > r.end) throw InputError("segment outside sequence");
        auto state = LstmState<Scalar>::zero(arch.width);
        for (std::size_t t = r.begin; t + 1 < r.end; ++t) {
            const auto prob = detail::step(arch, p, seq[t], state, static_cast<detail::StepCache<Scalar>*>(nullptr));
            detail::check_symbol(seq[t + 1], arch.vocab);
            out[t + 1] = log(prob[seq[t + 1]]);
        }
    }
    return out;
}

template <typename Model>
auto step_log_likelihoods(const Model& model, std::span<const Symbol> seq,
                          std::span<const Range> segments) {
    return step_log_likelihoods_effective(model_arch(model), model.effective(), seq, segments);
}

template <typename Model>
auto step_log_likelihoods(const Model& model, std::span<const Symbol> seq) {
    const Range whole{0, seq.size()};
    return step_log_likelihoods(model, seq, std::span<const Range>(&whole, 1));
}

/// Sum over segments of -log f(x_i | earlier symbols of the same segment).
/// The forward state is threaded exactly through each segment.
template <typename Model>
auto nll(const Model& model, std::span<const Symbol> seq, std::span<const Range> segments) {
    std::size_t predicted = 0;
    for (const Range& r : segments) predicted += r.size() > 0 ? r.size() - 1 : 0;
    if (predicted < 1) throw InputError("nll: need at least two symbols");
    const auto ll = step_log_likelihoods(model, seq, segments);
    using S = typename decltype(ll)::value_type;
    S total = S(0);
    for (S v : ll) total -= v;
    return total;
}

template <typename Model>
auto nll(const Model& model, std::span<const Symbol> seq) {
    const Range whole{0, seq.size()};
    return nll(model, seq, std::span<const Range>(&whole, 1));
}

/// Unrolled training window: consume inputs[t] from the running state and
/// predict targets[t].
template <typename Scalar = double>
struct TrainingWindow {
    LstmState<Scalar> initial;
    std::vector<Symbol> inputs;
    std::vector<Symbol> targets;
};

template <typename Scalar = double>
struct ObjectiveGradient {
    Scalar objective = Scalar(0);      ///< mean step NLL + beta * sum(g)
    Scalar mean_nll = Scalar(0);
    VectorX<Scalar> d_theta;
    VectorX<Scalar> d_z;
    std::vector<LstmState<Scalar>> final_states;  ///< one per window
};

namespace detail {

/// Backprop through one window; adds d(sum of step NLL)/d(effective) * scale
/// into `grad`. Returns the window's summed NLL and final state.
template <typename Scalar>
Scalar window_backward(const Architecture& a, const ConstViews<Scalar>& p, MutViews<Scalar>& dp,
                       const TrainingWindow<Scalar>& win, Scalar scale, LstmState<Scalar>& final_state,
                       std::vector<StepCache<Scalar>>& caches) {
    using std::log;
    const std::size_t T = win.inputs.size();
    if (win.targets.size() != T) throw InputError("training window: inputs/targets length mismatch");
    if (T > static_cast<std::size_t>(a.horizon)) throw InputError("training window longer than horizon");
    const int w = a.width;

    caches.resize(T);
    LstmState<Scalar> state = win.initial;
    Scalar loss = Scalar(0);
    for (std::size_t t = 0; t < T; ++t) {
        step(a, p, win.inputs[t], state, &caches[t]);
        check_symbol(win.targets[t], a.vocab);
        loss -= log(caches[t].prob[win.targets[t]]);
    }
    final_state = state;

    VectorX<Scalar> dh_next = VectorX<Scalar>::Zero(w);
    VectorX<Scalar> dc_next = VectorX<Scalar>::Zero(w);
    VectorX<Scalar> da(4 * w);
    for (std::size_t tt = T; tt-- > 0;) {
        const StepCache<Scalar>& s = caches[tt];
        VectorX<Scalar> dlogits = s.prob * scale;
        dlogits[win.targets[tt]] -= scale;

        dp.dw[3].noalias() += dlogits * s.act[2].transpose();
        dp.db[3] += dlogits;
        VectorX<Scalar> dx = p.dw[3].transpose() * dlogits;
        for (int l = 2; l >= 0; --l) {
            const VectorX<Scalar> dzl = dx.cwiseProduct((Scalar(1) - s.act[l].array().square()).matrix());
            const VectorX<Scalar>& in = l == 0 ? s.h : s.act[l - 1];
            dp.dw[l].noalias() += dzl * in.transpose();
            dp.db[l] += dzl;
            dx = p.dw[l].transpose() * dzl;
        }
        const VectorX<Scalar> dh = dx + dh_next;
        const VectorX<Scalar> d_o = dh.cwiseProduct(s.tanh_c);
        const VectorX<Scalar> dc =
            dh.cwiseProduct(s.o).cwiseProduct((Scalar(1) - s.tanh_c.array().square()).matrix()) + dc_next;
        da.segment(0, w) = dc.cwiseProduct(s.g).cwiseProduct(s.i.cwiseProduct((Scalar(1) - s.i.array()).matrix()));
        da.segment(w, w) = dc.cwiseProduct(s.c_prev).cwiseProduct(s.f.cwiseProduct((Scalar(1) - s.f.array()).matrix()));
        da.segment(2 * w, w) = dc.cwiseProduct(s.i).cwiseProduct((Scalar(1) - s.g.array().square()).matrix());
        da.segment(3 * w, w) = d_o.cwiseProduct(s.o.cwiseProduct((Scalar(1) - s.o.array()).matrix()));
        dc_next = dc.cwiseProduct(s.f);

        dp.w.noalias() += da * p.embed.col(s.input).transpose();
        dp.u.noalias() += da * s.h_prev.transpose();
        dp.b += da;
        dp.embed.col(s.input).noalias() += p.w.transpose() * da;
        dh_next.noalias() = p.u.transpose() * da;
    }
    return loss;
}

}  // namespace detail

/// Exact gradient of  mean step NLL over the batch + beta * sum_i g_i  with
/// respect to theta and z, by backpropagation through each window. The
/// initial state of a window is treated as a constant (truncated BPTT).
template <typename Scalar>
ObjectiveGradient<Scalar> objective_grad(const GatedModel<Scalar>& model,
                                         std::span<const TrainingWindow<Scalar>> batch, Scalar beta) {
    const Architecture& a = model.arch;
    const ParamLayout layout(a);
    const VectorX<Scalar> g = model.gates();
    const VectorX<Scalar> eff = g.cwiseProduct(model.theta);
    const detail::ConstViews<Scalar> p(layout, eff.data());

    std::size_t steps = 0;
    for (const auto& w : batch) steps += w.inputs.size();
    if (steps == 0) throw InputError("objective_grad: empty batch");
    const Scalar scale = Scalar(1) / static_cast<Scalar>(steps);

    VectorX<Scalar> d_eff = VectorX<Scalar>::Zero(eff.size());
    detail::MutViews<Scalar> dp(layout, d_eff.data());

    ObjectiveGradient<Scalar> out;
    out.final_states.resize(batch.size());
    std::vector<detail::StepCache<Scalar>> caches;
    Scalar loss = Scalar(0);
    for (std::size_t k = 0; k < batch.size(); ++k)
        loss += detail::window_backward(a, p, dp, batch[k], scale, out.final_states[k], caches);

    const VectorX<Scalar> dg_dz = g.cwiseProduct((Scalar(1) - g.array()).matrix());
    out.mean_nll = loss * scale;
    out.objective = out.mean_nll + beta * g.sum();
    out.d_theta = d_eff.cwiseProduct(g);
    out.d_z = (d_eff.cwiseProduct(model.theta) + VectorX<Scalar>::Constant(g.size(), beta))
                  .cwiseProduct(dg_dz);
    return out;
}

/// Objective value only (same definition as objective_grad), for
/// finite-difference checks.
template <typename Scalar>
Scalar objective_value(const GatedModel<Scalar>& model, std::span<const TrainingWindow<Scalar>> batch,
                       Scalar beta) {
    using std::log;
    const Architecture& a = model.arch;
    const ParamLayout layout(a);
    const VectorX<Scalar> g = model.gates();
    const VectorX<Scalar> eff = g.cwiseProduct(model.theta);
    const detail::ConstViews<Scalar> p(layout, eff.data());
    Scalar loss = Scalar(0);
    std::size_t steps = 0;
    for (const auto& w : batch) {
        auto state = w.initial;
        for (std::size_t t = 0; t < w.inputs.size(); ++t) {
            const auto prob = detail::step(a, p, w.inputs[t], state, static_cast<detail::StepCache<Scalar>*>(nullptr));
            loss -= log(prob[w.targets[t]]);
            ++steps;
        }
    }
    return loss / static_cast<Scalar>(steps) + beta * g.sum();
}

/// Number of non-zero effective parameters.
template <typename Derived>
std::size_t cost_J(const Eigen::MatrixBase<Derived>& effective) {
    return static_cast<std::size_t>((effective.array() != typename Derived::Scalar(0)).count());
}

template <typename Scalar>
std::size_t cost_J(const GatedModel<Scalar>& model) { return cost_J(model.effective()); }

template <typename Scalar>
std::size_t cost_J(const PrunedModel<Scalar>& model) {
    return static_cast<std::size_t>(std::count(model.mask.begin(), model.mask.end(), true));
}

/// Keeps parameter i iff g_i >= g_min; the base model is copied, not modified.
template <typename Scalar>
PrunedModel<Scalar> apply_threshold(const GatedModel<Scalar>& model, Scalar g_min) {
    PrunedModel<Scalar> out{model, g_min, {}};
    const VectorX<Scalar> g = model.gates();
    out.mask.resize(static_cast<std::size_t>(g.size()));
    for (Eigen::Index i = 0; i < g.size(); ++i) out.mask[static_cast<std::size_t>(i)] = !(g[i] < g_min);
    return out;
}

}  // namespace cbound
