#pragma once

#include "e3g/tensor.hpp"

#include <map>
#include <string>

namespace e3g {

/// Named parameter tensors. std::map keeps iteration (and serialization) order stable.
template <typename T>
using BasicParameterSet = std::map<std::string, BasicTensor<T>>;
using ParameterSet = BasicParameterSet<float>;

template <typename T>
struct BasicLayerGrads {
    std::map<std::string, BasicTensor<T>> params;
    BasicTensor<T> input;

    /// Adds g into params[name], creating the entry on first use.
    void accumulate(const std::string& name, const BasicTensor<T>& g)
    {
        auto [it, inserted] = params.try_emplace(name, g);
        if (inserted) return;
        if (it->second.shape() != g.shape())
            throw std::invalid_argument("gradient shape mismatch for " + name + ": " + it->second.shape().str() +
                                        " vs " + g.shape().str());
        for (std::size_t i = 0; i < g.size(); ++i) it->second[i] += g[i];
    }
};
using LayerGrads = BasicLayerGrads<float>;

template <typename U, typename T>
BasicParameterSet<U> cast_params(const BasicParameterSet<T>& params)
{
    BasicParameterSet<U> out;
    for (const auto& [name, t] : params) out.emplace(name, t.template cast<U>());
    return out;
}

/// SGD with heavy-ball momentum: v <- momentum * v + g; p <- p - lr * v.
class SgdOptimizer {
public:
    SgdOptimizer(float lr, float momentum);

    /// Rejects the whole step (parameters untouched) if any gradient is
    /// non-finite, or if a gradient has no matching parameter or the wrong shape.
    void step(ParameterSet& params, const LayerGrads& grads);

    float lr() const { return lr_; }
    void set_lr(float lr);
    float momentum() const { return momentum_; }

private:
    float lr_;
    float momentum_;
    std::map<std::string, Tensor> velocity_;
};

}  // namespace e3g
