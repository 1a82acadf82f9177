#pragma once
// Multi-level BCE supervision: full weight on the final prediction, lambda
// on the three auxiliary heads.

#include <array>

#include "mtnet/ops.hpp"

namespace mtnet {

struct LossReport {
    double total = 0;
    double main = 0;
    std::array<double, 3> aux{0, 0, 0};  // levels 2..4
    double lambda = 0.5;
};

// logits: four [T,1,H,W] maps; g: binary {0,1} ground truth of the same shape.
template <class T>
std::pair<Tensor<T>, LossReport> bce_multilevel(const std::array<Tensor<T>, 4>& logits,
                                                const Tensor<T>& g, T lambda) {
    for (const auto& l : logits)
        if (l.shape() != g.shape())
            throw std::runtime_error("bce_multilevel: logits/ground-truth shape mismatch");
    for (auto v : g.values())
        if (v != T(0) && v != T(1))
            throw std::runtime_error("bce_multilevel: ground truth must be binary");

    std::array<Tensor<T>, 4> terms;
    for (int k = 0; k < 4; ++k) terms[k] = mean_all(bce_with_logits(logits[k], g));

    auto aux_sum = add(add(terms[1], terms[2]), terms[3]);
    auto total = add(terms[0], scale(aux_sum, lambda));

    LossReport rep;
    rep.lambda = static_cast<double>(lambda);
    rep.main = static_cast<double>(terms[0].item());
    for (int k = 0; k < 3; ++k) rep.aux[k] = static_cast<double>(terms[k + 1].item());
    rep.total = static_cast<double>(total.item());
    return {total, rep};
}

}  // namespace mtnet
