#include "fraudfuse/numcore/optim.hpp"

#include <cmath>

#include "fraudfuse/errors.hpp"

namespace fraudfuse::nc {

void AdamW::step(ParameterStore& params, double lr) {
    if (!(lr >= 0.0)) throw NumericError("AdamW: learning rate must be non-negative");
    for (const auto& p : params.all()) {
        if (!p.tensor.has_grad()) throw NumericError("AdamW: parameter '" + p.name + "' has no gradient");
    }
    const std::uint64_t t = ++state_.step;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double bc1 = config_.raw_update ? 1.0 : 1.0 - std::pow(b1, static_cast<double>(t));
    const double bc2 = config_.raw_update ? 1.0 : 1.0 - std::pow(b2, static_cast<double>(t));

    for (auto& p : params.all()) {
        auto& buf = state_.moments[p.name];
        const std::size_t n = p.tensor.size();
        if (buf.m.size() != n) {
            buf.m.assign(n, 0.0);
            buf.v.assign(n, 0.0);
        }
        auto theta = p.tensor.mutable_data();
        const auto g = p.tensor.grad();
        for (std::size_t i = 0; i < n; ++i) {
            buf.m[i] = b1 * buf.m[i] + (1.0 - b1) * g[i];
            buf.v[i] = b2 * buf.v[i] + (1.0 - b2) * g[i] * g[i];
            const double m_hat = buf.m[i] / bc1;
            const double v_hat = buf.v[i] / bc2;
            const double old = theta[i];
            theta[i] = old - lr * m_hat / (std::sqrt(v_hat) + config_.eps) -
                       lr * config_.weight_decay * old;
        }
    }
}

void xavier_uniform(Tensor& t, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
    for (double& v : t.mutable_data()) v = rng.uniform(-bound, bound);
}

}  // namespace fraudfuse::nc
