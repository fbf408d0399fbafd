#include "fixtures.hpp"
#include "kgep/transd.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

using namespace kgep;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

// Materialized mapping matrix, used only as a reference.
Vector project_dense(const Vector& e, const Vector& ep, const Vector& rp) {
    const Eigen::MatrixXd m = rp * ep.transpose() + Eigen::MatrixXd::Identity(e.size(), e.size());
    return m * e;
}

double energy_dense(const TransdParams& p, const Triple& t) {
    const Vector rp = p.relation_proj.row(t.relation).transpose();
    const Vector h = project_dense(p.entity_vec.row(t.head).transpose(), p.entity_proj.row(t.head).transpose(), rp);
    const Vector tt = project_dense(p.entity_vec.row(t.tail).transpose(), p.entity_proj.row(t.tail).transpose(), rp);
    return -(h + p.relation_vec.row(t.relation).transpose() - tt).squaredNorm();
}

}  // namespace

TEST_CASE("projection in vector form") {
    const auto e = vec({1, 0}), ep = vec({1, 1}), rp = vec({0, 2});
    CHECK(project(e, ep, rp) == vec({1, 2}));
    CHECK(project(e, Vector::Zero(2), rp) == e);
    CHECK(project(e, ep, Vector::Zero(2)) == e);
    CHECK_THROWS(project(e, vec({1, 1, 1}), rp));

    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const Vector a = fixtures::random_matrix(rng, 1, 7).row(0).transpose();
        const Vector b = fixtures::random_matrix(rng, 1, 7).row(0).transpose();
        const Vector c = fixtures::random_matrix(rng, 1, 7).row(0).transpose();
        CHECK((project(a, b, c) - project_dense(a, b, c)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("energy") {
    const Vector z = Vector::Zero(2);
    const auto h = vec({0.3, -0.2}), r = vec({0.5, 0.25});
    CHECK(energy(h, z, h + r, z, r, z) == 0.0);
    CHECK(energy(z, z, vec({1, 0}), z, z, z) == -1.0);
    // e=(1,0), e_p=(1,1), r_p=(0,2): both sides project to (1,2) when t = h and r = 0
    const auto e = vec({1, 0}), ep = vec({1, 1}), rp = vec({0, 2});
    CHECK(energy(e, ep, e, ep, z, rp) == 0.0);
    // t = (0,1), t_p = (1,1): t_perp = (0,2)*1 + (0,1) = (0,3); h_perp - t_perp = (1,-1)
    CHECK(energy(e, ep, vec({0, 1}), ep, z, rp) == -2.0);

    Rng rng(2);
    const auto kg = fixtures::random_graph(rng, 8, 3, 20);
    const auto p = fixtures::random_transd(rng, 8, 3, 5);
    for (const auto& t : kg.triples()) {
        CHECK(energy(p, t) <= 0.0);
        CHECK(energy(p, t) == doctest::Approx(energy_dense(p, t)).epsilon(1e-12));
    }
}

TEST_CASE("margin loss") {
    Rng rng(3);
    auto p = fixtures::random_transd(rng, 4, 1, 3);
    const std::vector<Triple> golden{{0, 0, 1}, {2, 0, 3}};
    const std::vector<Triple> same = golden;
    CHECK(margin_loss(p, golden, same, 1.0) == doctest::Approx(2.0));

    std::vector<Triple> corrupt{{0, 0, 2}, {1, 0, 3}};
    double expected = 0;
    for (std::size_t i = 0; i < 2; ++i)
        expected += std::max(0.0, 1.0 + energy_dense(p, corrupt[i]) - energy_dense(p, golden[i]));
    CHECK(margin_loss(p, golden, corrupt, 1.0) == doctest::Approx(expected).epsilon(1e-12));

    // golden exactly satisfied, corruptions far away
    TransdParams q = TransdParams::zeros(4, 1, 1);
    q.relation_vec(0, 0) = 1.0;
    for (int i = 0; i < 4; ++i) q.entity_vec(i, 0) = i;
    const std::vector<Triple> g{{0, 0, 1}, {1, 0, 2}};
    const std::vector<Triple> c{{0, 0, 3}, {3, 0, 2}};
    CHECK(margin_loss(q, g, c, 1.0) == 0.0);
}

TEST_CASE("margin loss gradient matches central differences") {
    Rng rng(4);
    const double h = 1e-5;
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto kg = fixtures::random_graph(rng, 6, 2, 8);
        auto p = fixtures::random_transd(rng, 6, 2, 4, 0.6);
        std::vector<Triple> golden(kg.triples().begin(), kg.triples().end());
        std::vector<Triple> corrupt;
        for (const auto& t : golden) corrupt.push_back({t.head, t.relation, static_cast<EntityId>(rng.index(6))});
        const double margin = 5.0;  // keeps every hinge active
        auto grad = TransdParams::zeros(6, 2, 4);
        margin_loss_gradient(p, golden, corrupt, margin, grad);
        Matrix* tensors[] = {&p.entity_vec, &p.entity_proj, &p.relation_vec, &p.relation_proj};
        const Matrix* grads[] = {&grad.entity_vec, &grad.entity_proj, &grad.relation_vec, &grad.relation_proj};
        for (int k = 0; k < 4; ++k) {
            for (Eigen::Index i = 0; i < tensors[k]->size(); ++i) {
                double& x = tensors[k]->data()[i];
                const double saved = x;
                x = saved + h;
                const double up = margin_loss(p, golden, corrupt, margin);
                x = saved - h;
                const double down = margin_loss(p, golden, corrupt, margin);
                x = saved;
                const double numeric = (up - down) / (2 * h);
                const double analytic = grads[k]->data()[i];
                const double err = std::abs(numeric - analytic) / std::max(1.0, std::abs(numeric) + std::abs(analytic));
                worst = std::max(worst, err);
            }
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("corruption stays within the entity kind and off the golden set") {
    KnowledgeGraph kg;
    std::vector<EntityId> users, apps;
    for (int i = 0; i < 5; ++i) users.push_back(kg.add_entity(EntityKind::User, "u" + std::to_string(i)));
    for (int i = 0; i < 5; ++i) apps.push_back(kg.add_entity(EntityKind::App, "a" + std::to_string(i)));
    const auto cat = kg.add_entity(EntityKind::Category, "c");
    for (int i = 0; i < 5; ++i) {
        kg.add_triple(users[i], RelationKind::Interact, apps[i]);
        kg.add_triple(users[i], RelationKind::Interact, apps[(i + 1) % 5]);
        kg.add_triple(apps[i], RelationKind::HavingC, cat);
    }
    CorruptionSampler sampler(kg);
    Rng rng(5);
    int heads = 0, tails = 0;
    for (int n = 0; n < 2000; ++n) {
        const auto& g = kg.triples()[rng.index(kg.triple_count())];
        const auto c = sampler.corrupt(g, rng);
        if (g.relation == relation_id(RelationKind::HavingC) && c && c->tail != g.tail) FAIL("single category cannot be replaced");
        if (!c) continue;
        CHECK_FALSE(kg.contains(*c));
        CHECK(kg.entity(c->head).kind == kg.entity(g.head).kind);
        CHECK(kg.entity(c->tail).kind == kg.entity(g.tail).kind);
        CHECK(c->relation == g.relation);
        CHECK(((c->head != g.head) != (c->tail != g.tail)));
        (c->head != g.head ? heads : tails)++;
    }
    CHECK(heads > 300);
    CHECK(tails > 300);
}

TEST_CASE("training on the chain graph") {
    const auto kg = fixtures::chain_graph();
    TransdTrainOptions o;
    o.epochs = 200;
    o.batch_size = 4;
    o.learning_rate = 0.05;
    o.margin = 2.0;
    o.seed = 42;
    std::vector<double> seen;
    const auto r = train_transd(kg, o, [&](int, double loss) { seen.push_back(loss); });
    CHECK(r.epoch_loss.size() == 200);
    CHECK(seen == r.epoch_loss);
    CHECK(r.epoch_loss.back() < r.epoch_loss.front());
    CHECK(tail_hits_at(r.params, kg, 1) >= 0.8);
    CHECK(r.params.all_finite());
    for (Eigen::Index i = 0; i < r.params.entity_vec.rows(); ++i)
        CHECK(r.params.entity_vec.row(i).norm() == doctest::Approx(1.0));

    const auto again = train_transd(kg, o);
    CHECK(again.params == r.params);
    CHECK(again.epoch_loss == r.epoch_loss);
}

TEST_CASE("filtered hits treats other golden tails as non-competing") {
    // one relation, 3 entities, two golden tails for head 0
    KnowledgeGraph kg(KnowledgeGraph::Schema::Untyped, 1);
    for (int i = 0; i < 3; ++i) kg.add_entity(EntityKind::App, "x" + std::to_string(i));
    kg.add_triple({0, 0, 1});
    kg.add_triple({0, 0, 2});
    auto p = TransdParams::zeros(3, 1, 1);
    p.entity_vec(1, 0) = 1.0;
    p.entity_vec(2, 0) = 1.5;
    p.relation_vec(0, 0) = 1.0;
    // (0,0,1) has energy 0 and ranks first; (0,0,2) has energy -0.25 and is beaten
    // only by the golden (0,0,1), which is filtered
    CHECK(tail_hits_at(p, kg, 1) == 1.0);
}

TEST_CASE("checkpoint round trip is bit exact") {
    Rng rng(6);
    const auto p = fixtures::random_transd(rng, 7, 3, 5);
    std::stringstream buf;
    write_transd(buf, p);
    CHECK(read_transd(buf) == p);

    const auto path = std::filesystem::temp_directory_path() / "kgep_test_transd.ckpt";
    save_transd(path, p);
    CHECK(load_transd(path) == p);
    std::filesystem::remove(path);

    std::stringstream bad("not a checkpoint at all");
    CHECK_THROWS(read_transd(bad));
}
