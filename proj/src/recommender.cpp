#include "kgep/recommender.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace kgep {

namespace {

constexpr char kMagic[8] = {'K', 'G', 'E', 'P', 'M', 'O', 'D', 'L'};
constexpr std::uint32_t kVersion = 1;
constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEpsilon = 1e-8;

std::span<double> flat(Matrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<double> flat(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

void check_entity(const KnowledgeGraph& kg, const KgepModel& model, EntityId id) {
    if (id >= kg.entity_count() || id >= model.transd.entity_count()) {
        throw std::out_of_range("unknown entity id " + std::to_string(id));
    }
}

double regularize(const KgepModel& model, double lambda, PropagationGradient* grad) {
    if (lambda == 0.0) return 0.0;
    if (grad) {
        auto g = tensors(*grad);
        auto p = tensors(const_cast<KgepParams&>(model.params));
        for (std::size_t t = 0; t < g.size(); ++t)
            for (std::size_t i = 0; i < g[t].size(); ++i) g[t][i] += 2.0 * lambda * p[t][i];
    }
    return lambda * model.params.squared_norm();
}

double instance_loss(const KnowledgeGraph& kg, const KgepModel& model, const TrainingInstance& inst,
                     PropagationGradient* grad) {
    std::vector<EntityId> targets{inst.user, inst.positive};
    targets.insert(targets.end(), inst.negatives.begin(), inst.negatives.end());
    for (auto id : targets) check_entity(kg, model, id);

    const auto view = model.view(kg);
    PropagationTape tape(view, inst.user, targets);
    const Matrix& out = tape.outputs();
    const auto n = static_cast<Eigen::Index>(targets.size());

    double loss = 0.0;
    Matrix out_grad = Matrix::Zero(n, out.cols());
    for (Eigen::Index i = 1; i < n; ++i) {
        const double l = general_logit(model.transd, inst.user, targets[static_cast<std::size_t>(i)]) +
                         out.row(0).dot(out.row(i));
        const bool positive = i == 1;
        loss += positive ? softplus(-l) : softplus(l);
        const double dl = positive ? sigmoid(l) - 1.0 : sigmoid(l);
        out_grad.row(0) += dl * out.row(i);
        out_grad.row(i) += dl * out.row(0);
    }
    if (grad) tape.backward(out_grad, *grad);
    return loss;
}

double batch_loss(const KnowledgeGraph& kg, const KgepModel& model, std::span<const TrainingInstance> batch,
                  double lambda, PropagationGradient* grad) {
    double loss = 0.0;
    for (const auto& inst : batch) loss += instance_loss(kg, model, inst, grad);
    loss += regularize(model, lambda, grad);
    if (!std::isfinite(loss)) throw std::runtime_error("KGEP loss is not finite; parameters have diverged");
    return loss;
}

void adam_step(KgepModel& model, PropagationGradient& grad, double lr) {
    auto& st = model.adam;
    ++st.step;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(st.step));
    auto p = tensors(model.params);
    auto m = tensors(st.m);
    auto v = tensors(st.v);
    auto g = tensors(grad);
    for (std::size_t t = 0; t < p.size(); ++t) {
        for (std::size_t i = 0; i < p[t].size(); ++i) {
            const double gi = g[t][i];
            if (!std::isfinite(gi)) throw std::runtime_error("KGEP gradient is not finite");
            m[t][i] = kBeta1 * m[t][i] + (1.0 - kBeta1) * gi;
            v[t][i] = kBeta2 * v[t][i] + (1.0 - kBeta2) * gi * gi;
            p[t][i] -= lr * (m[t][i] / c1) / (std::sqrt(v[t][i] / c2) + kEpsilon);
        }
    }
}

void write_params(std::ostream& out, KgepParams& p) {
    for (auto t : tensors(p))
        for (double x : t) binio::write_le<double>(out, x);
}

void read_params(std::istream& in, KgepParams& p) {
    for (auto t : tensors(p))
        for (double& x : t) x = binio::read_le<double>(in);
}

}  // namespace

KgepParams KgepParams::from_transd(const TransdParams& transd, int layer_count, Rng& rng) {
    if (layer_count < 0) throw std::invalid_argument("propagation layer count must be >= 0");
    return {transd.entity_vec, transd.relation_vec, PropagationParams::xavier(layer_count, transd.dim(), rng)};
}

KgepParams KgepParams::zeros_like(const KgepParams& p) {
    return {Matrix::Zero(p.entity_state.rows(), p.entity_state.cols()),
            Matrix::Zero(p.relation_state.rows(), p.relation_state.cols()),
            PropagationParams::zeros(static_cast<int>(p.propagation.layer_count()),
                                     static_cast<int>(p.entity_state.cols()))};
}

double KgepParams::squared_norm() const {
    double s = entity_state.squaredNorm() + relation_state.squaredNorm();
    for (const auto& l : propagation.layers) s += l.weight.squaredNorm() + l.bias.squaredNorm();
    return s;
}

bool KgepParams::all_finite() const {
    bool ok = entity_state.allFinite() && relation_state.allFinite();
    for (const auto& l : propagation.layers) ok = ok && l.weight.allFinite() && l.bias.allFinite();
    return ok;
}

bool KgepParams::operator==(const KgepParams& o) const {
    auto a = tensors(const_cast<KgepParams&>(*this));
    auto b = tensors(const_cast<KgepParams&>(o));
    if (a.size() != b.size()) return false;
    for (std::size_t t = 0; t < a.size(); ++t) {
        if (a[t].size() != b[t].size()) return false;
        if (!std::equal(a[t].begin(), a[t].end(), b[t].begin(),
                        [](double x, double y) { return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y); }))
            return false;
    }
    return entity_state.cols() == o.entity_state.cols();
}

std::vector<std::span<double>> tensors(KgepParams& p) {
    std::vector<std::span<double>> out{flat(p.entity_state), flat(p.relation_state)};
    for (auto& l : p.propagation.layers) {
        out.push_back(flat(l.weight));
        out.push_back(flat(l.bias));
    }
    return out;
}

std::vector<std::span<double>> tensors(PropagationGradient& g) {
    std::vector<std::span<double>> out{flat(g.entity_state), flat(g.relation_vec)};
    for (auto& l : g.layers) {
        out.push_back(flat(l.weight));
        out.push_back(flat(l.bias));
    }
    return out;
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double general_logit(const TransdParams& transd, EntityId user, EntityId app) {
    const auto r = relation_id(RelationKind::Interact);
    const Vector u = project(transd.entity_vec.row(user).transpose(), transd.entity_proj.row(user).transpose(),
                             transd.relation_proj.row(r).transpose()) +
                     transd.relation_vec.row(r).transpose();
    const Vector a = project(transd.entity_vec.row(app).transpose(), transd.entity_proj.row(app).transpose(),
                             transd.relation_proj.row(r).transpose());
    return u.dot(a);
}

std::vector<double> logits(const KnowledgeGraph& kg, const KgepModel& model, EntityId user,
                           std::span<const EntityId> apps) {
    check_entity(kg, model, user);
    for (auto a : apps) check_entity(kg, model, a);
    std::vector<EntityId> targets{user};
    targets.insert(targets.end(), apps.begin(), apps.end());
    const auto view = model.view(kg);
    const Matrix out = propagate(view, user, targets);
    std::vector<double> result(apps.size());
    for (std::size_t i = 0; i < apps.size(); ++i) {
        result[i] = general_logit(model.transd, user, apps[i]) + out.row(0).dot(out.row(static_cast<Eigen::Index>(i + 1)));
    }
    return result;
}

double score(const KnowledgeGraph& kg, const KgepModel& model, EntityId user, EntityId app) {
    const EntityId apps[] = {app};
    return sigmoid(logits(kg, model, user, apps)[0]);
}

double bce_loss(const KnowledgeGraph& kg, const KgepModel& model, std::span<const TrainingInstance> batch,
                double lambda) {
    return batch_loss(kg, model, batch, lambda, nullptr);
}

double bce_loss_gradient(const KnowledgeGraph& kg, const KgepModel& model, std::span<const TrainingInstance> batch,
                         double lambda, PropagationGradient& grad) {
    return batch_loss(kg, model, batch, lambda, &grad);
}

PropagationGradient zero_gradient(const KgepParams& p) {
    PropagationGradient g;
    g.entity_state = Matrix::Zero(p.entity_state.rows(), p.entity_state.cols());
    g.relation_vec = Matrix::Zero(p.relation_state.rows(), p.relation_state.cols());
    for (const auto& l : p.propagation.layers) {
        g.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
    }
    return g;
}

std::vector<EntityId> interacted_apps(const KnowledgeGraph& kg, EntityId user) {
    std::vector<EntityId> out;
    for (const auto& nb : kg.neighbors(user))
        if (nb.relation == relation_id(RelationKind::Interact)) out.push_back(nb.tail);
    std::sort(out.begin(), out.end());
    return out;
}

NegativeSampler::NegativeSampler(const KnowledgeGraph& kg) : kg_(kg), apps_(kg.entities_of_kind(EntityKind::App)) {}

std::vector<EntityId> NegativeSampler::sample(EntityId user, int x, Rng& rng) const {
    const auto seen = interacted_apps(kg_, user);
    if (seen.size() >= apps_.size()) {
        throw std::runtime_error("no negative apps available for user '" + kg_.entity(user).label + "'");
    }
    std::vector<EntityId> out;
    out.reserve(static_cast<std::size_t>(x));
    while (out.size() < static_cast<std::size_t>(x)) {
        const EntityId a = apps_[rng.index(apps_.size())];
        if (!std::binary_search(seen.begin(), seen.end(), a)) out.push_back(a);
    }
    return out;
}

KgepTrainResult train_kgep(const KnowledgeGraph& kg, const TransdParams& transd, const KgepConfig& config,
                           std::uint64_t seed, const KgepTrainHooks& hooks) {
    if (transd.entity_count() != kg.entity_count() || transd.relation_count() != kg.relation_count()) {
        throw std::invalid_argument("TransD parameters do not match the knowledge graph");
    }
    if (config.batch_size < 1 || config.negatives_per_positive < 1 || config.epochs < 0) {
        throw std::invalid_argument("invalid KGEP training configuration");
    }
    Rng rng(seed);
    KgepTrainResult result;
    auto& model = result.model;
    model.transd = transd;
    model.config = config;
    model.seed = seed;
    model.params = KgepParams::from_transd(transd, config.propagation_layers, rng);
    model.adam.m = KgepParams::zeros_like(model.params);
    model.adam.v = KgepParams::zeros_like(model.params);

    std::vector<std::pair<EntityId, EntityId>> positives;
    for (const auto& t : kg.triples())
        if (t.relation == relation_id(RelationKind::Interact)) positives.emplace_back(t.head, t.tail);
    if (positives.empty()) throw std::invalid_argument("knowledge graph has no INTERACT triples to train on");

    const NegativeSampler sampler(kg);
    if (hooks.validate) result.validation.push_back(hooks.validate(model));

    std::vector<std::size_t> order(positives.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    PropagationGradient grad = zero_gradient(model.params);
    std::vector<TrainingInstance> batch;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const auto end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            batch.clear();
            for (std::size_t i = start; i < end; ++i) {
                const auto [u, a] = positives[order[i]];
                batch.push_back({u, a, sampler.sample(u, config.negatives_per_positive, rng)});
            }
            for (auto t : tensors(grad)) std::fill(t.begin(), t.end(), 0.0);
            epoch_loss += batch_loss(kg, model, batch, config.l2_lambda, &grad);
            adam_step(model, grad, config.learning_rate);
        }
        result.epoch_loss.push_back(epoch_loss);
        double val = std::numeric_limits<double>::quiet_NaN();
        if (hooks.validate) {
            val = hooks.validate(model);
            result.validation.push_back(val);
        }
        if (hooks.on_epoch) hooks.on_epoch(epoch, epoch_loss, val);
    }
    return result;
}

std::vector<Recommendation> recommend(const KnowledgeGraph& kg, const KgepModel& model, EntityId user, int k,
                                      bool exclude_train) {
    if (k < 1) throw std::invalid_argument("recommend: k must be >= 1");
    check_entity(kg, model, user);
    if (kg.entity(user).kind != EntityKind::User) throw std::invalid_argument("recommend: entity is not a user");
    const auto seen = exclude_train ? interacted_apps(kg, user) : std::vector<EntityId>{};
    std::vector<EntityId> candidates;
    for (auto a : kg.entities_of_kind(EntityKind::App))
        if (!std::binary_search(seen.begin(), seen.end(), a)) candidates.push_back(a);
    const auto l = logits(kg, model, user, candidates);

    std::vector<std::size_t> idx(candidates.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (l[a] != l[b]) return l[a] > l[b];
        return kg.entity(candidates[a]).label < kg.entity(candidates[b]).label;
    });
    std::vector<Recommendation> out;
    for (std::size_t i = 0; i < idx.size() && out.size() < static_cast<std::size_t>(k); ++i) {
        const double x = l[idx[i]];
        out.push_back({candidates[idx[i]], model.config.raw_score ? x : sigmoid(x)});
    }
    return out;
}

void write_model(std::ostream& out, const KgepModel& model) {
    out.write(kMagic, sizeof kMagic);
    binio::write_le<std::uint32_t>(out, kVersion);
    nlohmann::json header{{"config", model.config},
                          {"seed", model.seed},
                          {"entities", model.transd.entity_count()},
                          {"relations", model.transd.relation_count()},
                          {"dim", model.transd.dim()},
                          {"layers", model.params.propagation.layer_count()},
                          {"adam_step", model.adam.step}};
    binio::write_string(out, header.dump());
    write_transd(out, model.transd);
    auto& m = const_cast<KgepModel&>(model);
    write_params(out, m.params);
    write_params(out, m.adam.m);
    write_params(out, m.adam.v);
    if (!out) throw std::runtime_error("failed to write KGEP checkpoint");
}

KgepModel read_model(std::istream& in) {
    char magic[sizeof kMagic];
    if (!in.read(magic, sizeof magic) || !std::equal(magic, magic + sizeof magic, kMagic)) {
        throw std::runtime_error("not a KGEP checkpoint (bad magic)");
    }
    const auto version = binio::read_le<std::uint32_t>(in);
    if (version != kVersion) throw std::runtime_error("unsupported KGEP checkpoint version " + std::to_string(version));
    const auto header = nlohmann::json::parse(binio::read_string(in));
    KgepModel model;
    model.config = header.at("config").get<KgepConfig>();
    model.seed = header.at("seed").get<std::uint64_t>();
    model.adam.step = header.at("adam_step").get<std::uint64_t>();
    model.transd = read_transd(in);
    const auto entities = header.at("entities").get<std::size_t>();
    const auto relations = header.at("relations").get<std::size_t>();
    const auto dim = header.at("dim").get<int>();
    const auto layers = header.at("layers").get<int>();
    if (model.transd.entity_count() != entities || model.transd.relation_count() != relations ||
        model.transd.dim() != dim) {
        throw std::runtime_error("KGEP checkpoint header does not match its TransD tensors");
    }
    KgepParams shape{Matrix::Zero(static_cast<Eigen::Index>(entities), dim),
                     Matrix::Zero(static_cast<Eigen::Index>(relations), dim), PropagationParams::zeros(layers, dim)};
    model.params = shape;
    model.adam.m = shape;
    model.adam.v = shape;
    read_params(in, model.params);
    read_params(in, model.adam.m);
    read_params(in, model.adam.v);
    return model;
}

void save_model(const std::filesystem::path& path, const KgepModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_model(out, model);
}

KgepModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return read_model(in);
}

}  // namespace kgep
