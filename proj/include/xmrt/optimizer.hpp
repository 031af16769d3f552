#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "xmrt/encoders.hpp"

namespace xmrt {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;

    void validate() const;
};

struct OptimizerState {
    ModelParams first_moment;
    ModelParams second_moment;
    std::uint64_t step = 0;
    AdamWConfig config;

    static OptimizerState for_params(const ModelParams& params, const AdamWConfig& config = {});
};

// One decoupled-weight-decay Adam update on a flat tensor. `step` is the
// 1-based step number used for bias correction.
void adamw_update(std::span<double> theta, std::span<const double> grad, std::span<double> m,
                  std::span<double> v, std::uint64_t step, double lr, const AdamWConfig& cfg);

void adamw_step(OptimizerState& state, ModelParams& params, const ParamGradients& grads, double lr);

struct ScheduleConfig {
    std::size_t warmup_steps = 0;
    std::size_t total_steps = 1;
    double peak_lr = 2e-5;
    double floor_lr = 1e-7;

    void validate() const;
};

// Linear warmup 0 -> peak, then cosine decay peak -> floor.
double lr_at_step(const ScheduleConfig& sched, std::size_t step);

}  // namespace xmrt
