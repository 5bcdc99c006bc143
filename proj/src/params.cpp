#include "e3g/params.hpp"

#include <cmath>

namespace e3g {

SgdOptimizer::SgdOptimizer(float lr, float momentum) : lr_(lr), momentum_(momentum)
{
    if (!(lr > 0.0f)) throw std::invalid_argument("sgd: lr must be > 0");
    if (!(momentum >= 0.0f && momentum < 1.0f)) throw std::invalid_argument("sgd: momentum must be in [0,1)");
}

void SgdOptimizer::set_lr(float lr)
{
    if (!(lr > 0.0f)) throw std::invalid_argument("sgd: lr must be > 0");
    lr_ = lr;
}

void SgdOptimizer::step(ParameterSet& params, const LayerGrads& grads)
{
    for (const auto& [name, g] : grads.params) {
        auto it = params.find(name);
        if (it == params.end()) throw std::invalid_argument("sgd: gradient for unknown parameter " + name);
        if (it->second.shape() != g.shape())
            throw std::invalid_argument("sgd: gradient shape " + g.shape().str() + " does not match parameter " + name +
                                        " " + it->second.shape().str());
        for (float v : g.data())
            if (!std::isfinite(v)) throw std::runtime_error("sgd: non-finite gradient in " + name + "; step rejected");
    }
    for (const auto& [name, g] : grads.params) {
        Tensor& p = params.at(name);
        auto [vit, inserted] = velocity_.try_emplace(name, Tensor(g.shape()));
        Tensor& v = vit->second;
        for (std::size_t i = 0; i < g.size(); ++i) {
            v[i] = momentum_ * v[i] + g[i];
            p[i] -= lr_ * v[i];
        }
    }
}

}  // namespace e3g
