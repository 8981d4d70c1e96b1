#include "reprocs/synth.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "reprocs/subspace.hpp"

namespace reprocs {

Eigen::MatrixXd generate_basis(int n, std::uint64_t seed, int k) {
    if (n < 1) throw std::invalid_argument("n must be positive");
    if (k < 0) k = n;
    if (k > n) throw std::invalid_argument("k must not exceed n");
    Rng rng = Rng::stream(seed, 0x0ba515);
    Eigen::MatrixXd g(n, k);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < k; ++j) g(i, j) = rng.gaussian();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, k);
    fix_column_signs(q);
    return q;
}

void GeneratorSpec::validate() const {
    if (n < 1) throw std::invalid_argument("generator: n must be positive");
    if (variances.size() != n)
        throw std::invalid_argument("generator: variances length mismatch");
    if (!(0.0 < f_d && f_d < f && f < 1.0))
        throw std::invalid_argument("generator: require 0 < f_d < f < 1");
    if (!(0.0 < theta && theta < 1.0))
        throw std::invalid_argument("generator: require 0 < theta < 1");
    std::set<int> decayed;
    std::set<int> active(initial_support.begin(), initial_support.end());
    for (int i : initial_support)
        if (i < 0 || i >= n) throw std::invalid_argument("generator: index out of range");
    int prev_t = 0;
    for (const auto& ch : schedule) {
        if (ch.t <= prev_t)
            throw std::invalid_argument("generator: schedule must be strictly increasing");
        prev_t = ch.t;
        for (int i : ch.add) {
            if (i < 0 || i >= n) throw std::invalid_argument("generator: index out of range");
            if (decayed.count(i))
                throw std::invalid_argument("generator: decayed index re-added");
            if (active.count(i))
                throw std::invalid_argument("generator: index already active");
            active.insert(i);
        }
        for (int i : ch.decay) {
            if (!active.count(i))
                throw std::invalid_argument("generator: decaying index not active");
            active.erase(i);
            decayed.insert(i);
        }
    }
}

LowRankProcess::LowRankProcess(const GeneratorSpec& spec, Rng rng)
    : spec_(spec), rng_(rng) {
    spec_.validate();
    x_ = Eigen::VectorXd::Zero(spec_.n);
    state_.assign(static_cast<std::size_t>(spec_.n), State::kOff);
    activated_at_.assign(static_cast<std::size_t>(spec_.n), 0);
    for (int i : spec_.initial_support) state_[static_cast<std::size_t>(i)] = State::kActive;
}

const Eigen::VectorXd& LowRankProcess::step() {
    ++t_;
    while (next_change_ < spec_.schedule.size() &&
           spec_.schedule[next_change_].t == t_) {
        const auto& ch = spec_.schedule[next_change_];
        for (int i : ch.add) {
            state_[static_cast<std::size_t>(i)] = State::kActive;
            activated_at_[static_cast<std::size_t>(i)] = t_;
        }
        for (int i : ch.decay) state_[static_cast<std::size_t>(i)] = State::kDecaying;
        ++next_change_;
    }
    for (int i = 0; i < spec_.n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        switch (state_[k]) {
            case State::kOff:
            case State::kDead:
                x_(i) = 0.0;
                break;
            case State::kActive:
                if (activated_at_[k] == t_) {
                    x_(i) = rng_.gaussian(0.0, std::sqrt(spec_.theta * spec_.variances(i)));
                } else {
                    x_(i) = spec_.f * x_(i) +
                            rng_.gaussian(0.0, std::sqrt((1.0 - spec_.f * spec_.f) *
                                                         spec_.variances(i)));
                }
                break;
            case State::kDecaying:
                x_(i) *= spec_.f_d;
                if (std::abs(x_(i)) < 1e-300) {
                    x_(i) = 0.0;
                    state_[k] = State::kDead;
                }
                break;
        }
    }
    return x_;
}

std::vector<int> LowRankProcess::active_set() const {
    std::vector<int> out;
    for (int i = 0; i < spec_.n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (state_[k] == State::kActive) {
            out.push_back(i);
        } else if (state_[k] == State::kDecaying &&
                   std::abs(x_(i)) >= 1e-6 * std::sqrt(spec_.variances(i))) {
            out.push_back(i);
        }
    }
    return out;
}

SupportProcess::SupportProcess(const SupportProcessSpec& spec, Rng rng)
    : spec_(spec), rng_(rng) {
    if (spec_.frame_height < 1 || spec_.frame_width < 1)
        throw std::invalid_argument("support: bad frame geometry");
    if (spec_.kind == SupportKind::kStrips1d && spec_.frame_height != 1)
        throw std::invalid_argument("support: strips require a 1D frame");
    for (const auto& obj : spec_.objects) {
        if (obj.height > spec_.frame_height || obj.width > spec_.frame_width)
            throw std::invalid_argument("support: object does not fit in frame");
        if (spec_.kind == SupportKind::kConstantVelocity &&
            (obj.height % 2 == 0 || obj.width % 2 == 0))
            throw std::invalid_argument("support: constant-velocity objects need odd sides");
    }
    const int directions = spec_.kind == SupportKind::kStrips1d   ? 2
                           : spec_.kind == SupportKind::kBlocks2d ? 4
                                                                  : 0;
    if (spec_.p_static + directions * spec_.p_move > 1.0 + 1e-12)
        throw std::invalid_argument("support: motion probabilities exceed 1");
    for (const auto& obj : spec_.objects) {
        Eigen::Vector4d st;
        st << obj.row0, obj.col0, obj.vrow0, obj.vcol0;
        states_.push_back(st);
    }
    rebuild();
}

void SupportProcess::step() {
    for (std::size_t k = 0; k < states_.size(); ++k) {
        auto& st = states_[k];
        switch (spec_.kind) {
            case SupportKind::kStrips1d: {
                const double u = rng_.uniform();
                if (u >= spec_.p_static) {
                    if (u < spec_.p_static + spec_.p_move) st(1) -= 1.0;
                    else if (u < spec_.p_static + 2.0 * spec_.p_move) st(1) += 1.0;
                }
                break;
            }
            case SupportKind::kBlocks2d: {
                const double u = rng_.uniform();
                if (u >= spec_.p_static) {
                    const double p = spec_.p_move;
                    if (u < spec_.p_static + p) st(0) -= 1.0;
                    else if (u < spec_.p_static + 2 * p) st(0) += 1.0;
                    else if (u < spec_.p_static + 3 * p) st(1) -= 1.0;
                    else if (u < spec_.p_static + 4 * p) st(1) += 1.0;
                }
                break;
            }
            case SupportKind::kConstantVelocity: {
                // p <- p + v, then v <- v + n_t, per axis.
                st(0) += st(2);
                st(1) += st(3);
                st(2) += rng_.truncated_gaussian(spec_.accel_variance);
                st(3) += rng_.truncated_gaussian(spec_.accel_variance);
                break;
            }
        }
    }
    rebuild();
}

std::vector<int> SupportProcess::object_support(std::size_t k) const {
    const auto& obj = spec_.objects[k];
    const auto& st = states_[k];
    int top, left;
    if (spec_.kind == SupportKind::kConstantVelocity) {
        top = static_cast<int>(std::llround(st(0))) - (obj.height - 1) / 2;
        left = static_cast<int>(std::llround(st(1))) - (obj.width - 1) / 2;
    } else {
        top = static_cast<int>(std::llround(st(0)));
        left = static_cast<int>(std::llround(st(1)));
    }
    std::vector<int> out;
    for (int r = top; r < top + obj.height; ++r) {
        if (r < 0 || r >= spec_.frame_height) continue;
        for (int c = left; c < left + obj.width; ++c) {
            if (c < 0 || c >= spec_.frame_width) continue;
            out.push_back(r * spec_.frame_width + c);
        }
    }
    return out;
}

void SupportProcess::rebuild() {
    // Walk kinds clip-and-stay at the borders; the flag records any contact.
    clipped_ = false;
    for (std::size_t k = 0; k < states_.size(); ++k) {
        auto& st = states_[k];
        const auto& obj = spec_.objects[k];
        if (spec_.kind != SupportKind::kConstantVelocity) {
            const double rmax = spec_.frame_height - obj.height;
            const double cmax = spec_.frame_width - obj.width;
            if (st(0) < 0.0 || st(0) > rmax || st(1) < 0.0 || st(1) > cmax) clipped_ = true;
            st(0) = std::clamp(st(0), 0.0, rmax);
            st(1) = std::clamp(st(1), 0.0, cmax);
        }
    }
    overlay_ = Eigen::VectorXd::Zero(spec_.n());
    std::set<int> idx;
    for (std::size_t k = 0; k < states_.size(); ++k) {
        const auto cells = object_support(k);
        if (static_cast<int>(cells.size()) !=
            spec_.objects[k].height * spec_.objects[k].width)
            clipped_ = true;
        for (int i : cells) {
            overlay_(i) = spec_.objects[k].magnitude;
            idx.insert(i);
        }
    }
    support_.assign(idx.begin(), idx.end());
}

ComposedFrame compose(const Eigen::VectorXd& l, const Eigen::VectorXd& o,
                      const std::vector<int>& t, ComposeMode mode) {
    if (l.size() != o.size()) throw std::invalid_argument("compose: dimension mismatch");
    ComposedFrame out;
    if (mode == ComposeMode::kAdditive) {
        out.s = o;
        out.m = l + o;
        return out;
    }
    out.s = Eigen::VectorXd::Zero(l.size());
    out.m = l;
    for (int i : t) {
        out.s(i) = o(i) - l(i);
        out.m(i) = o(i);
    }
    return out;
}

std::vector<int> uniform_support(int n, int size, Rng& rng) {
    if (size > n || size < 0) throw std::invalid_argument("uniform_support: bad size");
    // Selection sampling: deterministic given the rng state.
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(size));
    int needed = size;
    for (int i = 0; i < n && needed > 0; ++i) {
        if (rng.uniform() * (n - i) < needed) {
            out.push_back(i);
            --needed;
        }
    }
    return out;
}

}  // namespace reprocs
