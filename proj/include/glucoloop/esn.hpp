#pragma once

// Leaky Echo State Network dynamics model and its 5-member ensemble.
//
// Reservoir update (f = tanh, f_out = identity):
//   x~(t) = tanh(W_in u(t) + W x(t-1))
//   x(t)  = (1-a) x(t-1) + a x~(t)
//   y(t)  = W_out [x(t); u(t)]
//
// Only W_out is learned, by ridge regression over feature rows accumulated
// across episodes: W_out = Y Phi^T (Phi Phi^T + beta I)^-1. W_in and W are
// drawn once and never change; W is rescaled so its estimated spectral
// radius equals the requested value (echo state property).

#include "glucoloop/risk.hpp"
#include "glucoloop/rng.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace glucoloop {

struct EsnHyper {
    int reservoir_size = 200;   // N
    int input_dim = 2;          // K: (bolus insulin, carbs)
    int output_dim = 1;         // L: BGL
    double leak_rate = 0.3;     // a in (0,1]
    double spectral_radius = 0.95;
    double input_scale = 0.5;
    double connectivity = 0.1;  // fraction of nonzero reservoir weights
    double ridge_beta = 1e-6;
    int washout = 24;           // steps skipped at episode start before collecting rows
    int buffer_capacity = 100000;

    void validate() const {
        if (reservoir_size < input_dim || reservoir_size <= 0)
            throw std::invalid_argument("EsnHyper: need reservoir_size >= input_dim > 0");
        if (!(leak_rate > 0.0 && leak_rate <= 1.0))
            throw std::invalid_argument("EsnHyper: leak_rate must be in (0, 1]");
        if (!(spectral_radius > 0.0 && spectral_radius < 1.0))
            throw std::invalid_argument("EsnHyper: spectral_radius must be in (0, 1)");
        if (!(connectivity > 0.0 && connectivity <= 1.0))
            throw std::invalid_argument("EsnHyper: connectivity must be in (0, 1]");
        if (!(input_scale > 0.0)) throw std::invalid_argument("EsnHyper: input_scale must be positive");
        if (!(ridge_beta >= 0.0)) throw std::invalid_argument("EsnHyper: ridge_beta must be >= 0");
        if (washout < 0) throw std::invalid_argument("EsnHyper: washout must be >= 0");
        if (output_dim != 1) throw std::invalid_argument("EsnHyper: only scalar output supported");
        if (buffer_capacity <= 0) throw std::invalid_argument("EsnHyper: buffer_capacity must be positive");
    }
};

using SparseMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct EsnWeights {
    Eigen::MatrixXd W_in;     // N x K, fixed after construction
    SparseMat W;              // N x N, fixed after construction
    Eigen::RowVectorXd W_out; // 1 x (N+K), empty until fitted

    bool fitted() const { return W_out.size() > 0; }
};

struct EsnState {
    Eigen::VectorXd x;  // hidden activations, each in (-1, 1)
    long t = 0;
};

inline EsnState zero_state(int reservoir_size) {
    EsnState s;
    s.x = Eigen::VectorXd::Zero(reservoir_size);
    s.t = 0;
    return s;
}

// Power-iteration estimate of the spectral radius: the geometric mean of the
// per-step growth factors over a fixed iteration count. The estimator is
// exactly positively homogeneous (estimate(cW) = c * estimate(W) for the same
// start vector and count), so rescaling W by target/estimate makes a repeat
// estimate return the target to rounding error even when the dominant
// eigenvalue is complex and the per-step growth never settles.
template <class Mat>
inline double estimate_spectral_radius(const Mat& W, int iters = 2000) {
    const auto n = W.rows();
    if (n == 0 || W.cols() != n) throw std::invalid_argument("estimate_spectral_radius: square matrix required");
    if (iters <= 0) throw std::invalid_argument("estimate_spectral_radius: iters must be positive");
    Eigen::VectorXd v = Eigen::VectorXd::Ones(n) / std::sqrt(static_cast<double>(n));
    double log_sum = 0.0;
    for (int k = 0; k < iters; ++k) {
        v = W * v;
        const double growth = v.norm();
        if (!std::isfinite(growth) || growth < 1e-300)
            throw std::runtime_error("estimate_spectral_radius: power iteration did not converge within bound");
        log_sum += std::log(growth);
        v /= growth;
    }
    return std::exp(log_sum / iters);
}

// Draws W_in dense uniform in [-input_scale, input_scale] and W sparse
// (per-entry occupancy coin at `connectivity`, values uniform in [-1, 1]),
// then rescales W so the estimated spectral radius equals the requested one.
inline EsnWeights init_esn(const EsnHyper& hyper, Rng& rng) {
    hyper.validate();
    const int n = hyper.reservoir_size;

    EsnWeights w;
    w.W_in.resize(n, hyper.input_dim);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < hyper.input_dim; ++k)
            w.W_in(i, k) = rng.uniform(-hyper.input_scale, hyper.input_scale);

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(hyper.connectivity * n * n * 1.2) + 16);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (rng.uniform01() < hyper.connectivity)
                triplets.emplace_back(i, j, rng.uniform(-1.0, 1.0));
    w.W.resize(n, n);
    w.W.setFromTriplets(triplets.begin(), triplets.end());
    w.W.makeCompressed();

    const double estimate = estimate_spectral_radius(w.W);
    if (!(estimate > 0.0))
        throw std::runtime_error("init_esn: reservoir draw has vanishing spectral radius");
    w.W *= hyper.spectral_radius / estimate;
    return w;
}

inline EsnState update_state(const EsnState& state, const EsnWeights& weights,
                             const Eigen::VectorXd& u, double leak_rate) {
    if (!u.allFinite()) throw std::invalid_argument("update_state: non-finite input");
    if (u.size() != weights.W_in.cols())
        throw std::invalid_argument("update_state: input dimension mismatch");
    if (state.x.size() != weights.W_in.rows())
        throw std::invalid_argument("update_state: state dimension mismatch");
    EsnState next;
    const Eigen::VectorXd activation = (weights.W_in * u + weights.W * state.x).array().tanh();
    next.x = (1.0 - leak_rate) * state.x + leak_rate * activation;
    next.t = state.t + 1;
    return next;
}

inline double readout(const EsnState& state, const Eigen::VectorXd& u, const Eigen::RowVectorXd& W_out) {
    if (W_out.size() == 0) throw std::logic_error("readout: W_out has not been fitted");
    if (W_out.size() != state.x.size() + u.size())
        throw std::invalid_argument("readout: W_out dimension mismatch");
    return W_out.head(state.x.size()).dot(state.x) + W_out.tail(u.size()).dot(u);
}

// Ring buffer of feature rows [x(t); u(t)] with scalar targets. The Gram
// matrix (sum of feature outer products) and the target moment are maintained
// incrementally: pushes add a rank-1 term, evictions subtract one, so the
// per-episode refit never rescans the full history.
class TrainingBuffer {
public:
    explicit TrainingBuffer(int feature_dim, int capacity = 100000)
        : dim_(feature_dim), capacity_(capacity),
          gram_(Eigen::MatrixXd::Zero(feature_dim, feature_dim)),
          moment_(Eigen::VectorXd::Zero(feature_dim)) {
        if (feature_dim <= 0 || capacity <= 0)
            throw std::invalid_argument("TrainingBuffer: dims and capacity must be positive");
    }

    void push(const Eigen::VectorXd& features, double target) {
        if (features.size() != dim_) throw std::invalid_argument("TrainingBuffer: feature dimension mismatch");
        if (!features.allFinite() || !std::isfinite(target))
            throw std::invalid_argument("TrainingBuffer: non-finite sample");
        if (static_cast<int>(rows_.size()) < capacity_) {
            rows_.push_back(features);
            targets_.push_back(target);
        } else {
            const Eigen::VectorXd& old = rows_[next_];
            gram_.selfadjointView<Eigen::Lower>().rankUpdate(old, -1.0);
            moment_ -= targets_[next_] * old;
            rows_[next_] = features;
            targets_[next_] = target;
            next_ = (next_ + 1) % capacity_;
        }
        gram_.selfadjointView<Eigen::Lower>().rankUpdate(features, 1.0);
        moment_ += target * features;
    }

    int rows() const { return static_cast<int>(rows_.size()); }
    int feature_dim() const { return dim_; }
    int capacity() const { return capacity_; }
    // Storage order, not insertion order once the ring has wrapped.
    const Eigen::VectorXd& row(int i) const { return rows_.at(static_cast<std::size_t>(i)); }
    double target(int i) const { return targets_.at(static_cast<std::size_t>(i)); }

    Eigen::MatrixXd gram() const {
        return Eigen::MatrixXd(gram_.selfadjointView<Eigen::Lower>());
    }
    const Eigen::VectorXd& moment() const { return moment_; }

private:
    int dim_;
    int capacity_;
    std::vector<Eigen::VectorXd> rows_;
    std::vector<double> targets_;
    std::size_t next_ = 0;  // eviction cursor once full
    Eigen::MatrixXd gram_;
    Eigen::VectorXd moment_;
};

// Ridge solve of the normal equations. Returns nullopt while the buffer has
// fewer rows than feature dimensions (caller keeps any previous W_out).
inline std::optional<Eigen::RowVectorXd> fit_readout(const TrainingBuffer& buffer, double beta) {
    if (!(beta >= 0.0)) throw std::invalid_argument("fit_readout: beta must be >= 0");
    if (buffer.rows() < buffer.feature_dim()) return std::nullopt;

    Eigen::MatrixXd a = buffer.gram();
    a.diagonal().array() += beta;
    Eigen::LDLT<Eigen::MatrixXd> solver(a);
    Eigen::VectorXd w;
    if (solver.info() == Eigen::Success) w = solver.solve(buffer.moment());
    // LDLT quietly zeroes components along near-null pivots, so judge
    // conditioning from the pivot spread, not just the residual.
    const double dmax = solver.info() == Eigen::Success ? solver.vectorD().cwiseAbs().maxCoeff() : 0.0;
    const double dmin = solver.info() == Eigen::Success ? solver.vectorD().cwiseAbs().minCoeff() : 0.0;
    const double scale = std::max(1.0, buffer.moment().norm());
    if (solver.info() != Eigen::Success || !(dmax > 0.0) || dmin < 1e-12 * dmax || !w.allFinite() ||
        (a * w - buffer.moment()).norm() > 1e-6 * scale * std::max(1.0, a.norm())) {
        throw std::runtime_error(
            "fit_readout: normal equations are singular or ill-conditioned; raise ridge beta");
    }
    return Eigen::RowVectorXd(w.transpose());
}

// Unit conventions for the glucose wiring: bolus is divided by 20x the basal
// step dose, carbs by 100 g, and the target trained as (BGL - 120)/100, so a
// zero-state, zero-input network predicts 120 mg/dl.
struct GlucoseScaling {
    double bolus_unit = 2.0;
    double carb_unit = 100.0;
    double bg_center = 120.0;
    double bg_unit = 100.0;

    static GlucoseScaling for_basal(double basal_rate) {
        GlucoseScaling s;
        s.bolus_unit = 20.0 * basal_rate;
        return s;
    }

    Eigen::VectorXd input(double bolus_u, double carbs_g) const {
        Eigen::VectorXd u(2);
        u << bolus_u / bolus_unit, carbs_g / carb_unit;
        return u;
    }
    double norm_bg(double bg) const { return (bg - bg_center) / bg_unit; }
    double denorm_bg(double y) const { return y * bg_unit + bg_center; }
};

// One ensemble member: fixed reservoir, live state advanced with realized
// (bolus, carbs), per-episode feature rows, ridge-refit readout.
class EsnModel {
public:
    EsnModel(const EsnHyper& hyper, const GlucoseScaling& scaling, std::uint64_t seed)
        : hyper_(hyper), scaling_(scaling),
          buffer_(hyper.reservoir_size + hyper.input_dim, hyper.buffer_capacity) {
        hyper_.validate();
        if (hyper_.input_dim != 2)
            throw std::invalid_argument("EsnModel: glucose wiring expects input_dim == 2");
        Rng rng(seed);
        weights_ = init_esn(hyper_, rng);
        state_ = zero_state(hyper_.reservoir_size);
    }

    void reset_state() {
        state_ = zero_state(hyper_.reservoir_size);
        episode_steps_ = 0;
    }

    // Advances the live state with the realized action and records a
    // training row (against the post-step CGM reading) once past washout.
    void observe(double bolus_u, double carbs_g, double cgm_after) {
        const Eigen::VectorXd u = scaling_.input(bolus_u, carbs_g);
        state_ = update_state(state_, weights_, u, hyper_.leak_rate);
        ++episode_steps_;
        if (episode_steps_ > hyper_.washout) {
            Eigen::VectorXd features(buffer_.feature_dim());
            features << state_.x, u;
            buffer_.push(features, scaling_.norm_bg(cgm_after));
        }
    }

    // Multi-step open-loop prediction from a copy of the live state; the
    // live state is never touched.
    std::vector<double> rollout(std::span<const double> bolus_u, std::span<const double> carbs_g) const {
        if (bolus_u.size() != carbs_g.size())
            throw std::invalid_argument("rollout: action and carb sequences must match in length");
        if (!weights_.fitted()) throw std::logic_error("rollout: readout has not been fitted");
        std::vector<double> out;
        out.reserve(bolus_u.size());
        EsnState s = state_;
        for (std::size_t i = 0; i < bolus_u.size(); ++i) {
            const Eigen::VectorXd u = scaling_.input(bolus_u[i], carbs_g[i]);
            s = update_state(s, weights_, u, hyper_.leak_rate);
            out.push_back(clamp_bg(scaling_.denorm_bg(readout(s, u, weights_.W_out))));
        }
        return out;
    }

    bool fit() {
        auto w = fit_readout(buffer_, hyper_.ridge_beta);
        if (!w) return false;
        weights_.W_out = *w;
        return true;
    }

    bool fitted() const { return weights_.fitted(); }
    const EsnHyper& hyper() const { return hyper_; }
    const GlucoseScaling& scaling() const { return scaling_; }
    const EsnWeights& weights() const { return weights_; }
    const EsnState& state() const { return state_; }
    const TrainingBuffer& buffer() const { return buffer_; }
    void set_readout(const Eigen::RowVectorXd& w_out) {
        if (w_out.size() != hyper_.reservoir_size + hyper_.input_dim)
            throw std::invalid_argument("set_readout: dimension mismatch");
        weights_.W_out = w_out;
    }

private:
    EsnHyper hyper_;
    GlucoseScaling scaling_;
    EsnWeights weights_;
    EsnState state_;
    TrainingBuffer buffer_;
    int episode_steps_ = 0;
};

// Five reservoirs with distinct weights sharing the observation stream;
// disagreement across members is the epistemic uncertainty signal.
class EsnEnsemble {
public:
    EsnEnsemble(int members, const EsnHyper& hyper, const GlucoseScaling& scaling, std::uint64_t seed) {
        if (members <= 0) throw std::invalid_argument("EsnEnsemble: need at least one member");
        members_.reserve(static_cast<std::size_t>(members));
        for (int m = 0; m < members; ++m)
            members_.emplace_back(hyper, scaling, derive_seed(seed, static_cast<std::uint64_t>(m)));
    }

    int size() const { return static_cast<int>(members_.size()); }
    const EsnModel& member(int m) const { return members_.at(static_cast<std::size_t>(m)); }
    EsnModel& member(int m) { return members_.at(static_cast<std::size_t>(m)); }

    void reset_states() {
        for (auto& m : members_) m.reset_state();
    }

    void observe(double bolus_u, double carbs_g, double cgm_after) {
        for (auto& m : members_) m.observe(bolus_u, carbs_g, cgm_after);
    }

    PredictionMatrix rollout(std::span<const double> bolus_u, std::span<const double> carbs_g) const {
        PredictionMatrix pm;
        pm.models = size();
        pm.horizon = static_cast<int>(bolus_u.size());
        pm.values.reserve(static_cast<std::size_t>(pm.models) * pm.horizon);
        for (int m = 0; m < pm.models; ++m) {
            try {
                const auto preds = members_[static_cast<std::size_t>(m)].rollout(bolus_u, carbs_g);
                pm.values.insert(pm.values.end(), preds.begin(), preds.end());
            } catch (const std::exception& e) {
                throw std::runtime_error("ensemble member " + std::to_string(m) + ": " + e.what());
            }
        }
        return pm;
    }

    bool fit() {
        bool all = true;
        for (auto& m : members_) all = m.fit() && all;
        return all;
    }

    bool fitted() const {
        for (const auto& m : members_)
            if (!m.fitted()) return false;
        return true;
    }

    // Fitted readouts as a structured text file, for run resumption.
    void save_readouts(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("save_readouts: cannot open " + path);
        out.precision(17);
        out << "glucoloop-readouts 1\n" << size() << ' '
            << (members_.front().hyper().reservoir_size + members_.front().hyper().input_dim) << '\n';
        for (const auto& m : members_) {
            if (!m.fitted()) throw std::logic_error("save_readouts: unfitted member");
            const auto& w = m.weights().W_out;
            for (Eigen::Index i = 0; i < w.size(); ++i) out << w(i) << (i + 1 == w.size() ? '\n' : ' ');
        }
        if (!out) throw std::runtime_error("save_readouts: write failed for " + path);
    }

    void load_readouts(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("load_readouts: cannot open " + path);
        std::string magic;
        int version = 0, count = 0, dim = 0;
        in >> magic >> version >> count >> dim;
        if (!in || magic != "glucoloop-readouts" || version != 1)
            throw std::runtime_error("load_readouts: unrecognized file header in " + path);
        if (count != size() ||
            dim != members_.front().hyper().reservoir_size + members_.front().hyper().input_dim)
            throw std::runtime_error("load_readouts: shape mismatch in " + path);
        for (auto& m : members_) {
            Eigen::RowVectorXd w(dim);
            for (int i = 0; i < dim; ++i) in >> w(i);
            if (!in) throw std::runtime_error("load_readouts: truncated file " + path);
            m.set_readout(w);
        }
    }

private:
    std::vector<EsnModel> members_;
};

} // namespace glucoloop
