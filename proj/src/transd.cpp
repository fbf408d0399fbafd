#include "kgep/transd.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace kgep {

namespace {

constexpr char kTransdMagic[8] = {'K', 'G', 'T', 'R', 'A', 'N', 'S', 'D'};
constexpr std::uint32_t kTransdVersion = 1;

void check_dims(Eigen::Index a, Eigen::Index b, const char* what) {
    if (a != b) throw std::invalid_argument(std::string("dimension mismatch in ") + what);
}

// Adds scale * d g(h, r, t) / d params into grad.
void add_energy_gradient(const TransdParams& p, const Triple& tr, double scale, TransdParams& grad) {
    const auto h = p.entity_vec.row(tr.head).transpose();
    const auto hp = p.entity_proj.row(tr.head).transpose();
    const auto t = p.entity_vec.row(tr.tail).transpose();
    const auto tp = p.entity_proj.row(tr.tail).transpose();
    const auto r = p.relation_vec.row(tr.relation).transpose();
    const auto rp = p.relation_proj.row(tr.relation).transpose();

    const double hp_h = hp.dot(h);
    const double tp_t = tp.dot(t);
    const Vector residual = (h + rp * hp_h) + r - (t + rp * tp_t);
    const Vector g = -2.0 * scale * residual;  // scale * dg/d(residual)
    const double rp_g = rp.dot(g);

    grad.entity_vec.row(tr.head) += (g + hp * rp_g).transpose();
    grad.entity_proj.row(tr.head) += (h * rp_g).transpose();
    grad.entity_vec.row(tr.tail) -= (g + tp * rp_g).transpose();
    grad.entity_proj.row(tr.tail) -= (t * rp_g).transpose();
    grad.relation_vec.row(tr.relation) += g.transpose();
    grad.relation_proj.row(tr.relation) += (g * (hp_h - tp_t)).transpose();
}

void check_aligned(std::span<const Triple> golden, std::span<const Triple> corrupted) {
    if (golden.size() != corrupted.size()) {
        throw std::invalid_argument("margin loss: golden and corrupted batches differ in size");
    }
}

}  // namespace

TransdParams TransdParams::zeros(std::size_t entities, std::size_t relations, int dim) {
    const auto E = static_cast<Eigen::Index>(entities);
    const auto R = static_cast<Eigen::Index>(relations);
    return {Matrix::Zero(E, dim), Matrix::Zero(E, dim), Matrix::Zero(R, dim), Matrix::Zero(R, dim)};
}

bool TransdParams::all_finite() const {
    return entity_vec.allFinite() && entity_proj.allFinite() && relation_vec.allFinite() && relation_proj.allFinite();
}

bool TransdParams::operator==(const TransdParams& o) const {
    auto same = [](const Matrix& a, const Matrix& b) {
        return a.rows() == b.rows() && a.cols() == b.cols() &&
               std::equal(a.data(), a.data() + a.size(), b.data());
    };
    return same(entity_vec, o.entity_vec) && same(entity_proj, o.entity_proj) &&
           same(relation_vec, o.relation_vec) && same(relation_proj, o.relation_proj);
}

Vector project(const VectorRef& e, const VectorRef& ep, const VectorRef& rp) {
    check_dims(e.size(), ep.size(), "project (entity_proj)");
    check_dims(e.size(), rp.size(), "project (relation_proj)");
    return rp * ep.dot(e) + e;
}

double energy(const VectorRef& h, const VectorRef& h_p, const VectorRef& t, const VectorRef& t_p, const VectorRef& r,
              const VectorRef& r_p) {
    check_dims(h.size(), r.size(), "energy (relation)");
    const Vector residual = project(h, h_p, r_p) + r - project(t, t_p, r_p);
    return -residual.squaredNorm();
}

double energy(const TransdParams& p, const Triple& tr) {
    return energy(p.entity_vec.row(tr.head).transpose(), p.entity_proj.row(tr.head).transpose(),
                  p.entity_vec.row(tr.tail).transpose(), p.entity_proj.row(tr.tail).transpose(),
                  p.relation_vec.row(tr.relation).transpose(), p.relation_proj.row(tr.relation).transpose());
}

double margin_loss(const TransdParams& p, std::span<const Triple> golden, std::span<const Triple> corrupted,
                   double margin) {
    check_aligned(golden, corrupted);
    double loss = 0.0;
    for (std::size_t i = 0; i < golden.size(); ++i) {
        loss += std::max(0.0, margin + energy(p, corrupted[i]) - energy(p, golden[i]));
    }
    return loss;
}

double margin_loss_gradient(const TransdParams& p, std::span<const Triple> golden, std::span<const Triple> corrupted,
                            double margin, TransdParams& grad) {
    check_aligned(golden, corrupted);
    double loss = 0.0;
    for (std::size_t i = 0; i < golden.size(); ++i) {
        const double hinge = margin + energy(p, corrupted[i]) - energy(p, golden[i]);
        if (hinge <= 0.0) continue;
        loss += hinge;
        add_energy_gradient(p, corrupted[i], 1.0, grad);
        add_energy_gradient(p, golden[i], -1.0, grad);
    }
    return loss;
}

CorruptionSampler::CorruptionSampler(const KnowledgeGraph& kg, int max_attempts)
    : kg_(kg), max_attempts_(max_attempts) {}

std::optional<Triple> CorruptionSampler::corrupt(const Triple& golden, Rng& rng) const {
    for (int attempt = 0; attempt < max_attempts_; ++attempt) {
        const bool replace_head = rng.bernoulli(0.5);
        const EntityId original = replace_head ? golden.head : golden.tail;
        const auto pool = kg_.entities_of_kind(kg_.entity(original).kind);
        if (pool.size() < 2) continue;
        const EntityId pick = pool[rng.index(pool.size())];
        if (pick == original) continue;
        Triple c = golden;
        (replace_head ? c.head : c.tail) = pick;
        if (!kg_.contains(c)) return c;
    }
    return std::nullopt;
}

TransdResult train_transd(const KnowledgeGraph& kg, const TransdTrainOptions& opt,
                          const std::function<void(int, double)>& on_epoch) {
    if (kg.triple_count() == 0) throw std::invalid_argument("train_transd: knowledge graph has no triples");
    if (opt.dim < 1 || opt.epochs < 1 || opt.batch_size < 1) throw std::invalid_argument("train_transd: bad options");

    Rng rng(opt.seed);
    const int d = opt.dim;
    const double bound = 6.0 / std::sqrt(static_cast<double>(d));
    TransdResult result;
    auto& p = result.params;
    p = TransdParams::zeros(kg.entity_count(), kg.relation_count(), d);
    for (Matrix* m : {&p.entity_vec, &p.entity_proj, &p.relation_vec, &p.relation_proj}) {
        for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = rng.uniform(-bound, bound);
    }
    for (Matrix* m : {&p.entity_vec, &p.entity_proj, &p.relation_vec, &p.relation_proj}) m->rowwise().normalize();

    TransdParams grad = TransdParams::zeros(kg.entity_count(), kg.relation_count(), d);
    const CorruptionSampler sampler(kg);
    std::vector<std::size_t> order(kg.triple_count());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<Triple> golden, corrupted;
    std::vector<EntityId> touched_entities;
    std::vector<RelationId> touched_relations;

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opt.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(opt.batch_size));
            golden.clear();
            corrupted.clear();
            for (std::size_t i = start; i < end; ++i) {
                const auto& g = kg.triples()[order[i]];
                if (auto c = sampler.corrupt(g, rng)) {
                    golden.push_back(g);
                    corrupted.push_back(*c);
                }
            }
            if (golden.empty()) continue;

            touched_entities.clear();
            touched_relations.clear();
            for (std::size_t i = 0; i < golden.size(); ++i) {
                for (const auto* t : {&golden[i], &corrupted[i]}) {
                    touched_entities.push_back(t->head);
                    touched_entities.push_back(t->tail);
                    touched_relations.push_back(t->relation);
                }
            }
            std::sort(touched_entities.begin(), touched_entities.end());
            touched_entities.erase(std::unique(touched_entities.begin(), touched_entities.end()), touched_entities.end());
            std::sort(touched_relations.begin(), touched_relations.end());
            touched_relations.erase(std::unique(touched_relations.begin(), touched_relations.end()),
                                    touched_relations.end());

            const double loss = margin_loss_gradient(p, golden, corrupted, opt.margin, grad);
            if (!std::isfinite(loss)) {
                throw std::runtime_error("train_transd: non-finite loss at epoch " + std::to_string(epoch));
            }
            epoch_loss += loss;
            const double step = opt.learning_rate / static_cast<double>(golden.size());
            for (auto e : touched_entities) {
                p.entity_vec.row(e) -= step * grad.entity_vec.row(e);
                p.entity_proj.row(e) -= step * grad.entity_proj.row(e);
                grad.entity_vec.row(e).setZero();
                grad.entity_proj.row(e).setZero();
            }
            for (auto r : touched_relations) {
                p.relation_vec.row(r) -= step * grad.relation_vec.row(r);
                p.relation_proj.row(r) -= step * grad.relation_proj.row(r);
                grad.relation_vec.row(r).setZero();
                grad.relation_proj.row(r).setZero();
            }
        }
        for (Eigen::Index e = 0; e < p.entity_vec.rows(); ++e) {
            const double n = p.entity_vec.row(e).norm();
            if (n > 0.0) p.entity_vec.row(e) /= n;
        }
        if (!std::isfinite(epoch_loss) || !p.all_finite()) {
            throw std::runtime_error("train_transd: parameters diverged at epoch " + std::to_string(epoch));
        }
        result.epoch_loss.push_back(epoch_loss);
        if (on_epoch) on_epoch(epoch, epoch_loss);
    }
    return result;
}

double tail_hits_at(const TransdParams& p, const KnowledgeGraph& kg, int n) {
    if (kg.triple_count() == 0) return 0.0;
    std::size_t hits = 0;
    for (const auto& t : kg.triples()) {
        const double golden = energy(p, t);
        int rank = 1;
        for (EntityId c = 0; c < kg.entity_count(); ++c) {
            if (c == t.tail) continue;
            const Triple candidate{t.head, t.relation, c};
            if (kg.contains(candidate)) continue;
            if (energy(p, candidate) >= golden) ++rank;
        }
        hits += rank <= n;
    }
    return static_cast<double>(hits) / static_cast<double>(kg.triple_count());
}

void write_transd(std::ostream& out, const TransdParams& p) {
    out.write(kTransdMagic, sizeof kTransdMagic);
    binio::write_le<std::uint32_t>(out, kTransdVersion);
    binio::write_le<std::uint64_t>(out, p.entity_count());
    binio::write_le<std::uint64_t>(out, p.relation_count());
    binio::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(p.dim()));
    binio::write_matrix(out, p.entity_vec);
    binio::write_matrix(out, p.entity_proj);
    binio::write_matrix(out, p.relation_vec);
    binio::write_matrix(out, p.relation_proj);
}

TransdParams read_transd(std::istream& in) {
    char magic[sizeof kTransdMagic];
    if (!in.read(magic, sizeof magic) || !std::equal(magic, magic + sizeof magic, kTransdMagic)) {
        throw std::runtime_error("not a TransD checkpoint");
    }
    if (binio::read_le<std::uint32_t>(in) != kTransdVersion) throw std::runtime_error("unsupported TransD checkpoint version");
    const auto E = binio::read_le<std::uint64_t>(in);
    const auto R = binio::read_le<std::uint64_t>(in);
    const auto d = binio::read_le<std::uint64_t>(in);
    if (d == 0 || d > 4096 || E > (1ULL << 32) || R > (1ULL << 32)) throw std::runtime_error("corrupt TransD checkpoint header");
    auto p = TransdParams::zeros(E, R, static_cast<int>(d));
    binio::read_matrix(in, p.entity_vec);
    binio::read_matrix(in, p.entity_proj);
    binio::read_matrix(in, p.relation_vec);
    binio::read_matrix(in, p.relation_proj);
    return p;
}

void save_transd(const std::filesystem::path& path, const TransdParams& p) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_transd(out, p);
}

TransdParams load_transd(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return read_transd(in);
}

}  // namespace kgep
