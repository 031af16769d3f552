#include "xmrt/optimizer.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "xmrt/errors.hpp"

namespace xmrt {

void AdamWConfig::validate() const {
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError("AdamW betas must lie in [0, 1)");
    }
    if (!(eps > 0.0)) throw ConfigError("AdamW eps must be positive");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be nonnegative");
}

OptimizerState OptimizerState::for_params(const ModelParams& params, const AdamWConfig& config) {
    config.validate();
    return {zeros_like(params), zeros_like(params), 0, config};
}

void adamw_update(std::span<double> theta, std::span<const double> grad, std::span<double> m,
                  std::span<double> v, std::uint64_t step, double lr, const AdamWConfig& cfg) {
    if (grad.size() != theta.size() || m.size() != theta.size() || v.size() != theta.size()) {
        throw ContractError("adamw_update: tensor sizes differ");
    }
    if (step == 0) throw ContractError("adamw_update: step numbers start at 1");
    if (!(lr >= 0.0)) throw ContractError("learning rate must be nonnegative");
    const double t = static_cast<double>(step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t k = 0; k < theta.size(); ++k) {
        m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * grad[k];
        v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * grad[k] * grad[k];
        const double m_hat = m[k] / c1;
        const double v_hat = v[k] / c2;
        theta[k] = theta[k] - lr * (m_hat / (std::sqrt(v_hat) + cfg.eps)) - lr * cfg.weight_decay * theta[k];
    }
}

void adamw_step(OptimizerState& state, ModelParams& params, const ParamGradients& grads, double lr) {
    check_same_layout(params, grads.values);
    check_same_layout(params, state.first_moment);
    auto theta = tensors(params);
    const auto g = tensors(grads.values);
    auto m = tensors(state.first_moment);
    auto v = tensors(state.second_moment);
    ++state.step;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        adamw_update(theta[i].data, g[i].data, m[i].data, v[i].data, state.step, lr, state.config);
    }
}

void ScheduleConfig::validate() const {
    if (!(warmup_steps < total_steps)) {
        throw ConfigError("warmup steps (" + std::to_string(warmup_steps) + ") must be below total steps (" +
                          std::to_string(total_steps) + ")");
    }
    if (!(floor_lr >= 0.0) || !(floor_lr <= peak_lr)) throw ConfigError("need 0 <= floor_lr <= peak_lr");
}

double lr_at_step(const ScheduleConfig& sched, std::size_t step) {
    sched.validate();
    if (step > sched.total_steps) {
        throw ContractError("step " + std::to_string(step) + " beyond schedule end " +
                            std::to_string(sched.total_steps));
    }
    // Both endpoints are returned verbatim rather than through the formulas.
    if (step == sched.warmup_steps) return sched.peak_lr;
    if (step == sched.total_steps) return sched.floor_lr;
    if (step < sched.warmup_steps) {
        return sched.peak_lr * static_cast<double>(step) / static_cast<double>(sched.warmup_steps);
    }
    const double progress = static_cast<double>(step - sched.warmup_steps) /
                            static_cast<double>(sched.total_steps - sched.warmup_steps);
    return sched.floor_lr +
           0.5 * (sched.peak_lr - sched.floor_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace xmrt
