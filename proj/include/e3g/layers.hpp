#pragma once

// Parameterized layer helpers shared by the backbone and the rotation head.
// Parameters live in a BasicParameterSet under "<name>.weight" / "<name>.bias".

#include "e3g/ops.hpp"
#include "e3g/params.hpp"

#include <random>
#include <string>

namespace e3g {

template <typename T>
struct ConvCache {
    BasicTensor<T> input;
    BasicTensor<T> pre;  // conv output before the optional ReLU
};

struct ConvSpec {
    std::string name;
    int stride = 1;
    int pad = 1;
    bool relu = true;
};

template <typename T>
BasicTensor<T> conv_layer_forward(const BasicParameterSet<T>& params, const ConvSpec& spec, const BasicTensor<T>& x,
                                  ConvCache<T>* cache)
{
    BasicTensor<T> pre = conv2d(x, params.at(spec.name + ".weight"), params.at(spec.name + ".bias"), spec.stride, spec.pad);
    BasicTensor<T> out = spec.relu ? relu(pre) : pre;
    if (cache) {
        cache->input = x;
        cache->pre = std::move(pre);
    }
    return out;
}

template <typename T>
BasicTensor<T> conv_layer_backward(const BasicParameterSet<T>& params, const ConvSpec& spec, const ConvCache<T>& cache,
                                   const BasicTensor<T>& grad_out, BasicLayerGrads<T>& grads)
{
    const BasicTensor<T> g = spec.relu ? relu_backward(cache.pre, grad_out) : grad_out;
    auto cg = conv2d_backward(cache.input, params.at(spec.name + ".weight"), spec.stride, spec.pad, g);
    grads.accumulate(spec.name + ".weight", cg.weight);
    grads.accumulate(spec.name + ".bias", cg.bias);
    return std::move(cg.input);
}

/// He-normal weights, zero bias.
inline void init_conv(ParameterSet& params, const std::string& name, std::size_t cout, std::size_t cin, std::size_t k,
                      std::mt19937_64& rng)
{
    std::normal_distribution<float> dist(0.0f, std::sqrt(2.0f / static_cast<float>(cin * k * k)));
    Tensor w(Shape{cout, cin, k, k});
    for (auto& v : w.data()) v = dist(rng);
    params[name + ".weight"] = std::move(w);
    params[name + ".bias"] = Tensor(Shape{cout});
}

inline void init_linear(ParameterSet& params, const std::string& name, std::size_t dout, std::size_t din,
                        std::mt19937_64& rng, float gain = 2.0f)
{
    std::normal_distribution<float> dist(0.0f, std::sqrt(gain / static_cast<float>(din)));
    Tensor w(Shape{dout, din});
    for (auto& v : w.data()) v = dist(rng);
    params[name + ".weight"] = std::move(w);
    params[name + ".bias"] = Tensor(Shape{dout});
}

}  // namespace e3g
