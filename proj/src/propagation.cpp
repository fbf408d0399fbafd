#include "kgep/propagation.hpp"

#include <cmath>
#include <stdexcept>

namespace kgep {

PropagationParams PropagationParams::xavier(int layer_count, int dim, Rng& rng) {
    auto p = zeros(layer_count, dim);
    const double bound = std::sqrt(6.0 / (3.0 * dim));
    for (auto& layer : p.layers) {
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = rng.uniform(-bound, bound);
    }
    return p;
}

PropagationParams PropagationParams::zeros(int layer_count, int dim) {
    PropagationParams p;
    for (int k = 0; k < layer_count; ++k) p.layers.push_back({Matrix::Zero(dim, 2 * dim), Vector::Zero(dim)});
    return p;
}

std::span<const Neighbor> neighborhood(const KnowledgeGraph& kg, EntityId v, std::size_t max_neighbors) {
    auto nb = kg.neighbors(v);
    if (max_neighbors > 0 && nb.size() > max_neighbors) nb = nb.first(max_neighbors);
    return nb;
}

std::vector<double> relation_weights(const Eigen::Ref<const Vector>& user, std::span<const Neighbor> neighbors,
                                     const Matrix& relation_vec) {
    if (neighbors.empty()) throw std::invalid_argument("relation_weights: empty neighborhood");
    std::vector<double> w(neighbors.size());
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < neighbors.size(); ++i) {
        w[i] = relation_vec.row(neighbors[i].relation).dot(user.transpose());
        top = std::max(top, w[i]);
    }
    double total = 0.0;
    for (auto& x : w) total += (x = std::exp(x - top));
    for (auto& x : w) x /= total;
    return w;
}

Vector aggregate_neighbors(const Matrix& state, const Eigen::Ref<const Vector>& user,
                           std::span<const Neighbor> neighbors, const Matrix& relation_vec) {
    const auto w = relation_weights(user, neighbors, relation_vec);
    Vector agg = Vector::Zero(state.cols());
    for (std::size_t i = 0; i < neighbors.size(); ++i) agg += w[i] * state.row(neighbors[i].tail).transpose();
    return agg;
}

Vector dense_update(const Eigen::Ref<const Vector>& self, const Eigen::Ref<const Vector>& aggregate,
                    const PropagationLayer& layer) {
    const auto d = self.size();
    if (layer.weight.rows() != d || layer.weight.cols() != 2 * d || layer.bias.size() != d) {
        throw std::invalid_argument("propagation layer shape does not match embedding dimension");
    }
    Vector pre = layer.weight.leftCols(d) * self + layer.weight.rightCols(d) * aggregate + layer.bias;
    return pre.array().tanh().matrix();
}

Matrix layer_update(const Matrix& state, const Eigen::Ref<const Vector>& user, const KnowledgeGraph& kg,
                    const Matrix& relation_vec, const PropagationLayer& layer, std::size_t max_neighbors) {
    Matrix next = state;
    for (EntityId v = 0; v < kg.entity_count(); ++v) {
        const auto nb = neighborhood(kg, v, max_neighbors);
        if (nb.empty()) continue;
        const Vector agg = aggregate_neighbors(state, user, nb, relation_vec);
        next.row(v) = dense_update(state.row(v).transpose(), agg, layer).transpose();
    }
    return next;
}

PropagationGradient PropagationGradient::zeros_like(const PropagationView& view) {
    PropagationGradient g;
    g.entity_state = Matrix::Zero(view.entity_state.rows(), view.entity_state.cols());
    g.relation_vec = Matrix::Zero(view.relation_vec.rows(), view.relation_vec.cols());
    for (const auto& layer : view.params.layers) {
        g.layers.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()), Vector::Zero(layer.bias.size())});
    }
    return g;
}

std::uint32_t PropagationTape::local_index(EntityId v) {
    auto [it, inserted] = local_.try_emplace(v, static_cast<std::uint32_t>(nodes_.size()));
    if (inserted) nodes_.push_back(v);
    return it->second;
}

PropagationTape::PropagationTape(const PropagationView& view, EntityId user, std::span<const EntityId> targets)
    : view_(view), user_(user), targets_(targets.begin(), targets.end()) {
    const auto& kg = view.kg;
    if (user >= kg.entity_count()) throw std::invalid_argument("propagate: unknown user entity");
    for (auto t : targets_)
        if (t >= kg.entity_count()) throw std::invalid_argument("propagate: unknown target entity " + std::to_string(t));
    if (view.entity_state.rows() != static_cast<Eigen::Index>(kg.entity_count())) {
        throw std::invalid_argument("propagate: entity state does not cover the graph");
    }

    const std::size_t L = view.params.layer_count();
    const auto d = view.entity_state.cols();
    need_.resize(L + 1);

    std::vector<char> marked;
    auto mark = [&](std::vector<std::uint32_t>& set, EntityId v) {
        const auto i = local_index(v);
        if (marked.size() <= i) marked.resize(nodes_.size(), 0);
        if (!marked[i]) {
            marked[i] = 1;
            set.push_back(i);
        }
    };
    for (auto t : targets_) mark(need_[L], t);
    for (std::size_t k = L; k > 0; --k) {
        marked.assign(nodes_.size(), 0);
        for (auto i : need_[k]) mark(need_[k - 1], nodes_[i]);
        for (std::size_t n = 0; n < need_[k].size(); ++n) {
            for (const auto& nb : neighborhood(kg, nodes_[need_[k][n]], view.max_neighbors)) mark(need_[k - 1], nb.tail);
        }
    }

    const Vector user_vec = view.entity_state.row(user).transpose();
    weights_.resize(nodes_.size());
    state_.assign(L + 1, Matrix::Zero(static_cast<Eigen::Index>(nodes_.size()), d));
    aggregate_.assign(L + 1, Matrix());
    for (auto i : need_[0]) state_[0].row(i) = view.entity_state.row(nodes_[i]);

    for (std::size_t k = 1; k <= L; ++k) {
        const auto& layer = view.params.layers[k - 1];
        aggregate_[k] = Matrix::Zero(static_cast<Eigen::Index>(nodes_.size()), d);
        for (auto i : need_[k]) {
            const auto nb = neighborhood(kg, nodes_[i], view.max_neighbors);
            if (nb.empty()) {
                state_[k].row(i) = state_[k - 1].row(i);
                continue;
            }
            if (weights_[i].empty()) weights_[i] = relation_weights(user_vec, nb, view.relation_vec);
            Vector agg = Vector::Zero(d);
            for (std::size_t j = 0; j < nb.size(); ++j) agg += weights_[i][j] * state_[k - 1].row(local_.at(nb[j].tail)).transpose();
            aggregate_[k].row(i) = agg.transpose();
            state_[k].row(i) = dense_update(state_[k - 1].row(i).transpose(), agg, layer).transpose();
        }
    }

    outputs_.resize(static_cast<Eigen::Index>(targets_.size()), d);
    for (std::size_t t = 0; t < targets_.size(); ++t) outputs_.row(static_cast<Eigen::Index>(t)) = state_[L].row(local_.at(targets_[t]));
}

void PropagationTape::backward(const Matrix& output_grad, PropagationGradient& grad) const {
    const std::size_t L = view_.params.layer_count();
    const auto d = view_.entity_state.cols();
    if (output_grad.rows() != static_cast<Eigen::Index>(targets_.size()) || output_grad.cols() != d) {
        throw std::invalid_argument("PropagationTape::backward: gradient shape mismatch");
    }

    std::vector<Matrix> g(L + 1, Matrix::Zero(static_cast<Eigen::Index>(nodes_.size()), d));
    for (std::size_t t = 0; t < targets_.size(); ++t) g[L].row(local_.at(targets_[t])) += output_grad.row(static_cast<Eigen::Index>(t));

    const Vector user_vec = view_.entity_state.row(user_).transpose();
    Vector user_grad = Vector::Zero(d);
    for (std::size_t k = L; k >= 1; --k) {
        const auto& layer = view_.params.layers[k - 1];
        auto& layer_grad = grad.layers[k - 1];
        for (auto i : need_[k]) {
            const Vector gi = g[k].row(i).transpose();
            const auto nb = neighborhood(view_.kg, nodes_[i], view_.max_neighbors);
            if (nb.empty()) {
                g[k - 1].row(i) += gi.transpose();
                continue;
            }
            const Vector y = state_[k].row(i).transpose();
            const Vector dpre = gi.array() * (1.0 - y.array().square());
            const Vector prev = state_[k - 1].row(i).transpose();
            const Vector agg = aggregate_[k].row(i).transpose();
            layer_grad.weight.leftCols(d) += dpre * prev.transpose();
            layer_grad.weight.rightCols(d) += dpre * agg.transpose();
            layer_grad.bias += dpre;
            g[k - 1].row(i) += (layer.weight.leftCols(d).transpose() * dpre).transpose();
            const Vector dagg = layer.weight.rightCols(d).transpose() * dpre;
            const double dagg_dot_agg = dagg.dot(agg);
            const auto& w = weights_[i];
            for (std::size_t j = 0; j < nb.size(); ++j) {
                const auto tj = local_.at(nb[j].tail);
                const double dscore = w[j] * (dagg.dot(state_[k - 1].row(tj).transpose()) - dagg_dot_agg);
                g[k - 1].row(tj) += w[j] * dagg.transpose();
                grad.relation_vec.row(nb[j].relation) += dscore * user_vec.transpose();
                user_grad += dscore * view_.relation_vec.row(nb[j].relation).transpose();
            }
        }
    }
    for (auto i : need_[0]) grad.entity_state.row(nodes_[i]) += g[0].row(i);
    grad.entity_state.row(user_) += user_grad.transpose();
}

Matrix propagate(const PropagationView& view, EntityId user, std::span<const EntityId> targets) {
    return PropagationTape(view, user, targets).outputs();
}

}  // namespace kgep
