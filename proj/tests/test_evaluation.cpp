#include "fixtures.hpp"
#include "kgep/arkg_builder.hpp"
#include "kgep/evaluation.hpp"
#include "kgep/synthetic.hpp"
#include "kgep/text.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

using namespace kgep;
using Ids = std::vector<std::uint32_t>;

namespace {

RatingMatrix matrix(const std::vector<std::vector<int>>& dense) {
    std::vector<RatingRecord> r;
    for (std::size_t u = 0; u < dense.size(); ++u)
        for (std::size_t a = 0; a < dense[u].size(); ++a)
            if (dense[u][a]) r.push_back({"u" + std::to_string(u), "a" + std::to_string(a), dense[u][a] / 5.0});
    return build_rating_matrix(r);
}

// Reference AP: walks the whole list, counting hits by hand.
double brute_ap(const Ids& ranked, const std::set<std::uint32_t>& rel, std::size_t k) {
    double sum = 0;
    for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
        if (!rel.count(ranked[i])) continue;
        std::size_t hits = 0;
        for (std::size_t j = 0; j <= i; ++j) hits += rel.count(ranked[j]);
        sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
    return sum / static_cast<double>(std::min(k, rel.size()));
}

class FixedRanking : public Recommender {
public:
    explicit FixedRanking(std::vector<Ids> r) : r_(std::move(r)) {}
    std::string name() const override { return "fixed"; }
    Ids rank(std::uint32_t user, std::size_t k) const override {
        Ids out = r_[user];
        if (out.size() > k) out.resize(k);
        return out;
    }

private:
    std::vector<Ids> r_;
};

}  // namespace

TEST_CASE("split counts and partition invariants") {
    CHECK(split_counts(10).train == 7);
    CHECK(split_counts(10).validation == 1);
    CHECK(split_counts(10).test == 2);
    CHECK(split_counts(11).train == 8);  // round(7.7)
    CHECK(split_counts(11).validation == 1);
    CHECK(split_counts(11).test == 2);
    CHECK(split_counts(3).train == 2);  // round(2.1)
    CHECK(split_counts(3).test == 1);
    CHECK_THROWS(split_counts(2));
    for (std::size_t n = 3; n < 200; ++n) {
        const auto c = split_counts(n);
        CHECK(c.train + c.validation + c.test == n);
        CHECK(c.train == static_cast<std::size_t>(std::llround(0.7 * static_cast<double>(n))));
        CHECK(c.train >= 1);
    }

    Rng rng(1);
    std::vector<std::vector<int>> dense(20, std::vector<int>(30, 0));
    for (auto& row : dense) {
        for (int i = 0; i < 12; ++i) row[rng.index(30)] = 1 + static_cast<int>(rng.index(5));
        row[0] = 3;
    }
    const auto m = matrix(dense);
    const auto s = split_interactions(m, 5);
    for (std::uint32_t u = 0; u < m.user_count(); ++u) {
        std::multiset<std::uint32_t> joined;
        for (const auto* part : {&s.train.matrix(), &s.validation, &s.test})
            for (const auto& e : part->row(u)) {
                joined.insert(e.app);
                CHECK(e.rating == m.value(u, e.app));
            }
        std::multiset<std::uint32_t> original;
        for (const auto& e : m.row(u)) original.insert(e.app);
        CHECK(joined == original);  // disjoint and exhaustive
        const auto c = split_counts(m.row(u).size());
        CHECK(s.train.matrix().row(u).size() == c.train);
        CHECK(s.validation.row(u).size() == c.validation);
        CHECK(s.test.row(u).size() == c.test);
    }
    const auto again = split_interactions(m, 5);
    CHECK(again.train.matrix() == s.train.matrix());
    CHECK(again.test == s.test);
    CHECK_FALSE(split_interactions(m, 6).test == s.test);

    CHECK_THROWS(split_interactions(matrix({{1, 1, 0}, {1, 1, 1}}), 1));
}

TEST_CASE("precision and recall") {
    const Ids ranked{0, 1, 2};  // a, b, c
    const Ids rel{0, 2};
    auto pr = precision_recall_at_k(ranked, rel, 2);
    CHECK(pr.precision == 0.5);
    CHECK(pr.recall == 0.5);
    pr = precision_recall_at_k(ranked, Ids{0, 1, 2, 3}, 3);
    CHECK(pr.precision == 1.0);
    pr = precision_recall_at_k(ranked, Ids{7}, 3);
    CHECK(pr.precision == 0.0);
    CHECK(pr.recall == 0.0);
    // short lists still divide by K
    pr = precision_recall_at_k(Ids{4}, Ids{4}, 10);
    CHECK(pr.precision == 0.1);
    CHECK(pr.recall == 1.0);
    CHECK_THROWS(precision_recall_at_k(Ids{1, 1}, rel, 2));
    CHECK_THROWS(precision_recall_at_k(ranked, rel, 0));
    CHECK_THROWS(precision_recall_at_k(ranked, Ids{}, 2));
}

TEST_CASE("average precision agrees with the brute-force oracle on all short rankings") {
    CHECK(average_precision_at_k(Ids{5}, Ids{5}, 10) == 1.0);
    CHECK(average_precision_at_k(Ids{0, 1}, Ids{1}, 2) == 0.5);

    // every ordering of every subset of 5 items, every nonempty relevant subset, k = 1..6
    for (unsigned used = 0; used < 32; ++used) {
        Ids items;
        for (std::uint32_t i = 0; i < 5; ++i)
            if (used >> i & 1) items.push_back(i);
        do {
            for (unsigned relmask = 1; relmask < 32; ++relmask) {
                std::set<std::uint32_t> rel;
                Ids relv;
                for (std::uint32_t i = 0; i < 5; ++i)
                    if (relmask >> i & 1) {
                        rel.insert(i);
                        relv.push_back(i);
                    }
                for (std::size_t k = 1; k <= 6; ++k) {
                    const double ap = average_precision_at_k(items, relv, k);
                    CHECK(ap == doctest::Approx(brute_ap(items, rel, k)).epsilon(1e-15));
                    const auto pr = precision_recall_at_k(items, relv, k);
                    const double hits_p = pr.precision * static_cast<double>(k);
                    const double hits_r = pr.recall * static_cast<double>(rel.size());
                    CHECK(std::abs(hits_p - std::round(hits_p)) < 1e-9);
                    CHECK(std::abs(hits_r - std::round(hits_r)) < 1e-9);
                    CHECK(ap >= 0.0);
                    CHECK(ap <= 1.0);
                }
            }
        } while (std::next_permutation(items.begin(), items.end()));
    }
}

TEST_CASE("top-k ordering and exclusion") {
    const std::vector<double> s{0.5, 0.9, 0.5, 0.1, 0.9};
    const std::vector<RatingMatrix::Entry> ex{{4, 1.0}};
    CHECK(top_k(s, {}, 3) == Ids{1, 4, 0});
    CHECK(top_k(s, ex, 3) == Ids{1, 0, 2});
    CHECK(top_k(s, ex, 10) == Ids{1, 0, 2, 3});
}

TEST_CASE("popularity baseline") {
    // a1 and a2 tie at 3, a0 has 1
    const TrainingMatrix train(matrix({{0, 1, 1}, {0, 1, 1}, {1, 1, 0}, {0, 0, 1}}));
    const PopularityRecommender pop(train);
    CHECK(pop.rank(0, 3) == Ids{0});
    CHECK(pop.rank(2, 3) == Ids{2});
    CHECK(pop.rank(3, 3) == Ids{1, 0});

    const TrainingMatrix three(matrix({{1, 1, 0}, {0, 1, 1}, {0, 1, 0}, {0, 0, 1}}));
    // counts a0 = 1, a1 = 3, a2 = 2; user 3 has only a2
    CHECK(PopularityRecommender(three).rank(3, 5) == Ids{1, 0});
    CHECK(PopularityRecommender(three).rank(0, 5) == Ids{2});
}

TEST_CASE("user-based collaborative filtering") {
    // u0 and u1 identical on a0, a1; u1 also has a2. u2 shares nothing with u0.
    const TrainingMatrix train(matrix({{5, 5, 0, 0}, {5, 5, 3, 0}, {0, 0, 0, 4}}));
    const auto sim = user_similarity_matrix(train.matrix());
    const UserCfRecommender cf(train, sim);
    CHECK(cf.rank(0, 2) == Ids{2, 3});  // a3 only has score 0 from u2 (sim 0)
    const auto s0 = cf.scores(0);
    const double t01 = sim.at(0, 1);
    CHECK(s0[2] == doctest::Approx(t01 * 0.6).epsilon(1e-14));
    CHECK(s0[3] == 0.0);
    // by hand: u0 = (1,1,0,0), u1 = (1,1,0.6,0); dot 2, |u0|^2 2, |u1|^2 2.36
    CHECK(t01 == doctest::Approx(2.0 / (2.0 + 2.36 - 2.0)).epsilon(1e-14));

    // isolated user: no nonzero scores, falls back to index order over unseen apps
    CHECK(cf.rank(2, 4) == Ids{0, 1, 2});
    for (std::uint32_t u = 0; u < 3; ++u)
        for (auto a : cf.rank(u, 4)) CHECK_FALSE(train.matrix().contains(u, a));
}

TEST_CASE("evaluate averages only users with held-out apps, independent of threads") {
    using E = RatingMatrix::Entry;
    const RatingMatrix held({"u0", "u1", "u2"}, {"a0", "a1", "a2", "a3"}, {{E{0, 1.0}, E{3, 1.0}}, {}, {E{1, 1.0}}});
    const FixedRanking model({{0, 1, 2}, {0, 1, 2}, {0, 2, 1}});
    const std::vector<const Recommender*> models{&model};
    const std::vector<std::size_t> ks{1, 3};
    const auto r = evaluate(models, held, ks, 1);
    CHECK(r.evaluated_users == 2);
    // user0: relevant {0,3}; user2: relevant {1}
    CHECK(r.at("fixed", 1).precision == doctest::Approx((1.0 + 0.0) / 2));
    CHECK(r.at("fixed", 1).recall == doctest::Approx((0.5 + 0.0) / 2));
    CHECK(r.at("fixed", 3).precision == doctest::Approx((1.0 / 3 + 1.0 / 3) / 2));
    CHECK(r.at("fixed", 3).recall == doctest::Approx((0.5 + 1.0) / 2));
    CHECK(r.at("fixed", 3).map == doctest::Approx((1.0 / 2 + (1.0 / 3) / 1) / 2));
    CHECK_THROWS(r.at("fixed", 7));

    Rng rng(3);
    std::vector<std::vector<int>> dense(60, std::vector<int>(25, 0));
    std::vector<Ids> rankings;
    for (auto& row : dense) {
        for (int i = 0; i < 4; ++i) row[rng.index(25)] = 5;
        Ids order(25);
        std::iota(order.begin(), order.end(), 0u);
        rng.shuffle(std::span<std::uint32_t>(order));
        rankings.push_back(order);
    }
    const auto big = matrix(dense);
    const FixedRanking random_model(rankings);
    const std::vector<const Recommender*> ms{&random_model};
    const std::vector<std::size_t> ks2{5, 10};
    const auto one = evaluate(ms, big, ks2, 1);
    for (int t : {2, 3, 8}) {
        const auto many = evaluate(ms, big, ks2, t);
        for (std::size_t i = 0; i < one.rows.size(); ++i) {
            CHECK(many.rows[i].precision == one.rows[i].precision);
            CHECK(many.rows[i].recall == one.rows[i].recall);
            CHECK(many.rows[i].map == one.rows[i].map);
        }
    }
    CHECK(mean_average_precision(random_model, big, 10, 4) == one.at("fixed", 10).map);
}

TEST_CASE("report format") {
    MetricReport r;
    r.rows = {{"kgep", 10, 0.25, 0.5, 1.0 / 3}, {"usercf", 20, 0.0, 1.0, 0.1234567}};
    std::ostringstream out;
    write_report(out, r);
    CHECK(out.str() ==
          "model\tK\tprecision\trecall\tmap\n"
          "kgep\t10\t0.250000\t0.500000\t0.333333\n"
          "usercf\t20\t0.000000\t1.000000\t0.123457\n");
}

TEST_CASE("synthetic generator") {
    SyntheticSpec spec;
    const auto d = generate_synthetic(spec, 123);
    CHECK(d.apps.size() == 100);
    CHECK(d.user_cluster.size() == 200);
    const auto again = generate_synthetic(spec, 123);
    CHECK(again.apps == d.apps);
    CHECK(again.ratings == d.ratings);
    CHECK_FALSE(generate_synthetic(spec, 124).ratings == d.ratings);

    // expected interactions within three standard deviations
    const double users = 200, in = 50, out = 50;
    const double mean = users * in * spec.p_in + users * out * spec.p_out;
    const double var = users * in * spec.p_in * (1 - spec.p_in) + users * out * spec.p_out * (1 - spec.p_out);
    CHECK(std::abs(static_cast<double>(d.ratings.size()) - mean) <= 3 * std::sqrt(var));

    std::map<std::string, int> app_cluster;
    for (std::size_t i = 0; i < d.apps.size(); ++i) app_cluster[d.apps[i].app_id] = d.app_cluster[i];
    std::size_t cross = 0;
    for (const auto& r : d.ratings) {
        CHECK(stars_from_grade(r.rating).has_value());
        const int u = std::stoi(r.user_id.substr(5)) - 1;
        cross += d.user_cluster[static_cast<std::size_t>(u)] != app_cluster[r.app_id];
    }
    const double cross_mean = users * out * spec.p_out;
    CHECK(std::abs(static_cast<double>(cross) - cross_mean) <= 3 * std::sqrt(cross_mean * (1 - spec.p_out)));

    SyntheticSpec closed = spec;
    closed.p_out = 0.0;
    const auto c = generate_synthetic(closed, 1);
    std::map<std::string, int> cc;
    for (std::size_t i = 0; i < c.apps.size(); ++i) cc[c.apps[i].app_id] = c.app_cluster[i];
    for (const auto& r : c.ratings)
        CHECK(c.user_cluster[static_cast<std::size_t>(std::stoi(r.user_id.substr(5)) - 1)] == cc[r.app_id]);

    SyntheticSpec bad = spec;
    bad.p_out = 0.3;
    CHECK_THROWS(generate_synthetic(bad, 1));

    // cluster vocabularies are disjoint and survive preprocessing
    const auto v0 = cluster_vocabulary(0, 30), v1 = cluster_vocabulary(1, 30);
    std::set<std::string> s0(v0.begin(), v0.end());
    for (const auto& w : v1) CHECK_FALSE(s0.count(w));
    for (const auto& w : v0) {
        CHECK(text::porter_stem(w) == w);
        CHECK_FALSE(text::english_stopwords().count(w));
    }
    CHECK(synthetic_user_id(7) == "user-00007");
    CHECK(synthetic_app_id(12) == "app-00012");
}

TEST_CASE("validation MAP improves during training on planted clusters") {
    SyntheticSpec spec;
    spec.users_per_cluster = 30;
    spec.apps_per_cluster = 20;
    spec.p_in = 0.5;
    const auto data = generate_synthetic(spec, 7);
    const auto m = build_rating_matrix(data.ratings);
    const auto split = split_interactions(m, 7);

    std::vector<AppRecord> apps;
    for (const auto& id : m.apps())
        apps.push_back(*std::find_if(data.apps.begin(), data.apps.end(), [&](const AppRecord& a) { return a.app_id == id; }));
    std::vector<std::string> texts;
    for (const auto& a : apps) texts.push_back(a.readme_text);
    const auto corpus = preprocess(texts, text::english_stopwords(), 1);
    const auto topics = fit_lda(corpus, {4, 12.5, 0.01, 50, 7});
    const auto kg = build_arkg(apps, split.train, topics, assign_topics(topics), KgConfig{});

    TransdTrainOptions to;
    to.epochs = 30;
    to.seed = 7;
    const auto transd = train_transd(kg, to).params;
    KgepConfig c;
    c.epochs = 10;
    KgepTrainHooks hooks;
    hooks.validate = [&](const KgepModel& model) {
        const KgepRecommender rec(kg, model, split.train);
        return mean_average_precision(rec, split.validation, 10);
    };
    const auto r = train_kgep(kg, transd, c, 7, hooks);
    REQUIRE(r.validation.size() == 11);
    const double best = *std::max_element(r.validation.begin() + 1, r.validation.end());
    CHECK(best > r.validation.front());
}
