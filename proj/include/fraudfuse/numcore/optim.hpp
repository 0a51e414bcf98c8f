#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fraudfuse/numcore/random.hpp"
#include "fraudfuse/numcore/tensor.hpp"

namespace fraudfuse::nc {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.001;
    // Skip bias correction: theta -= lr * m / (sqrt(v) + eps), the bare form
    // without the 1 - beta^t denominators.
    bool raw_update = false;
};

struct MomentBuffers {
    std::vector<double> m;
    std::vector<double> v;
};

struct OptimizerState {
    std::map<std::string, MomentBuffers> moments;
    std::uint64_t step = 0;
};

// Decoupled weight decay Adam:
//   m <- b1 m + (1-b1) g ;  v <- b2 v + (1-b2) g^2
//   theta <- theta - lr * mhat / (sqrt(vhat) + eps) - lr * wd * theta
class AdamW {
public:
    explicit AdamW(AdamWConfig config = {}) : config_(config) {}

    // Applies one update using each parameter's accumulated gradient.
    // Throws NumericError naming the first parameter with no gradient buffer.
    void step(ParameterStore& params, double lr);

    const AdamWConfig& config() const { return config_; }
    const OptimizerState& state() const { return state_; }

private:
    AdamWConfig config_;
    OptimizerState state_;
};

// Glorot/Xavier uniform: U(-sqrt(6/(fan_in+fan_out)), +sqrt(...)).
void xavier_uniform(Tensor& t, Rng& rng);

}  // namespace fraudfuse::nc
