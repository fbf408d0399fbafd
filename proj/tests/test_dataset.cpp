#include "kgep/config.hpp"
#include "kgep/csv.hpp"
#include "kgep/dataset.hpp"
#include "kgep/rating_matrix.hpp"
#include "kgep/rng.hpp"
#include "kgep/text.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

using namespace kgep;

namespace {

const char* kHeader =
    "app_id,category,provider,content_rating,has_ads,is_free,interactive_elements,avg_rating,install_count,"
    "updated_date,size_bytes,readme_text\n";

std::string two_apps() {
    return std::string(kHeader) +
           "a1,Games,Acme,Everyone,true,false,Shares Info;Users Interact,4.3,15000,2020-05-01,3145728,\"Fun, fast \"\"arcade\"\" game\"\n"
           "a2,Tools,Beta,Teen,false,true,,3.9,120,2019-11-30,VARIES,\"multi\nline\"\n";
}

RatingRecord rec(std::string u, std::string a, double r = 1.0) { return {std::move(u), std::move(a), r}; }

AppRecord app(std::string id) {
    AppRecord a;
    a.app_id = std::move(id);
    a.category = "c";
    a.provider = "p";
    a.content_rating = "Everyone";
    a.updated_date = {2020, 1, 1};
    return a;
}

}  // namespace

TEST_CASE("csv reader handles quotes, embedded newlines and CRLF") {
    std::istringstream in("a,\"b,c\",\"d\"\"e\"\r\n\"x\ny\",,z\n");
    csv::Reader r(in);
    auto row = r.next();
    REQUIRE(row);
    CHECK(*row == std::vector<std::string>{"a", "b,c", "d\"e"});
    CHECK(r.line() == 1);
    row = r.next();
    REQUIRE(row);
    CHECK(*row == std::vector<std::string>{"x\ny", "", "z"});
    CHECK(r.line() == 2);
    CHECK_FALSE(r.next());

    std::istringstream bad("a,\"open\n");
    csv::Reader rb(bad);
    CHECK_THROWS(rb.next());
    CHECK(csv::escape("plain") == "plain");
    CHECK(csv::escape("a\"b") == "\"a\"\"b\"");
}

TEST_CASE("two-app three-rating fixture parses to the same records") {
    std::istringstream apps_in(two_apps());
    const auto apps = parse_apps(apps_in, "apps.csv");
    REQUIRE(apps.size() == 2);
    CHECK(apps[0].app_id == "a1");
    CHECK(apps[0].has_ads);
    CHECK_FALSE(apps[0].is_free);
    CHECK(apps[0].interactive_elements == std::vector<std::string>{"Shares Info", "Users Interact"});
    CHECK(apps[0].avg_rating == 4.3);
    CHECK(apps[0].install_count == 15000);
    CHECK(apps[0].updated_date == Date{2020, 5, 1});
    CHECK(apps[0].size_bytes == std::optional<std::uint64_t>(3145728));
    CHECK(apps[0].readme_text == "Fun, fast \"arcade\" game");
    CHECK(apps[1].interactive_elements.empty());
    CHECK_FALSE(apps[1].size_bytes.has_value());
    CHECK(apps[1].readme_text == "multi\nline");

    std::istringstream ratings_in("user_id,app_id,rating\nu1,a1,0.2\nu1,a2,1.0\nu2,a1,0.6\n");
    std::vector<SkipEntry> skipped;
    std::vector<std::string> ids{"a1", "a2"};
    const auto ratings = parse_ratings(ratings_in, "ratings.csv", ids, skipped);
    CHECK(skipped.empty());
    CHECK(ratings == std::vector<RatingRecord>{rec("u1", "a1", 0.2), rec("u1", "a2", 1.0), rec("u2", "a1", 0.6)});
}

TEST_CASE("invalid grade names file, line and field") {
    std::istringstream in("user_id,app_id,rating\nu1,a1,0.2\nu1,a2,0.3\n");
    std::vector<SkipEntry> skipped;
    std::vector<std::string> ids{"a1", "a2"};
    try {
        parse_ratings(in, "ratings.csv", ids, skipped);
        FAIL("expected a DataError");
    } catch (const DataError& e) {
        CHECK(e.file() == "ratings.csv");
        CHECK(e.line() == 3);
        CHECK(e.field() == "rating");
        CHECK(std::string(e.what()).find("ratings.csv:3") != std::string::npos);
    }
}

TEST_CASE("unknown app is skipped, duplicates keep the last occurrence") {
    std::istringstream in("user_id,app_id,rating\nu1,a1,0.2\nu1,x9,0.4\nu1,a1,0.8\n");
    std::vector<SkipEntry> skipped;
    std::vector<std::string> ids{"a1"};
    const auto ratings = parse_ratings(in, "r.csv", ids, skipped);
    REQUIRE(skipped.size() == 2);
    CHECK(skipped[0].line == 3);
    CHECK(skipped[0].reason.find("x9") != std::string::npos);
    CHECK(ratings == std::vector<RatingRecord>{rec("u1", "a1", 0.8)});
}

TEST_CASE("app field validation") {
    auto broken = [](const std::string& row) {
        std::istringstream in(std::string(kHeader) + row + "\n");
        return in.str();
    };
    for (const std::string row : {"a1,G,P,E,maybe,true,,4.0,10,2020-01-01,1,t", "a1,G,P,E,true,true,,5.5,10,2020-01-01,1,t",
                            "a1,G,P,E,true,true,,4.0,-1,2020-01-01,1,t", "a1,G,P,E,true,true,,4.0,10,2020-02-30,1,t",
                            "a1,G,P,E,true,true,,4.0,10,2020-01-01,big,t", ",G,P,E,true,true,,4.0,10,2020-01-01,1,t"}) {
        INFO(row);
        std::istringstream in(broken(row));
        CHECK_THROWS_AS(parse_apps(in, "apps.csv"), DataError);
    }
    std::istringstream dup(std::string(kHeader) + "a1,G,P,E,true,true,,4,1,2020-01-01,1,t\na1,G,P,E,true,true,,4,1,2020-01-01,1,t\n");
    CHECK_THROWS_AS(parse_apps(dup, "apps.csv"), DataError);
    std::istringstream header("app_id,category\n");
    CHECK_THROWS_AS(parse_apps(header, "apps.csv"), DataError);
}

TEST_CASE("grades map s stars to s/5") {
    for (int s = 1; s <= 5; ++s) {
        CHECK(grade_from_stars(s) == s / 5.0);
        CHECK(stars_from_grade(s / 5.0) == s);
    }
    CHECK_FALSE(stars_from_grade(0.3));
    CHECK_FALSE(stars_from_grade(0.0));
    CHECK_THROWS(grade_from_stars(6));
}

TEST_CASE("write then load round-trips records") {
    std::istringstream apps_in(two_apps());
    auto apps = parse_apps(apps_in, "apps.csv");
    std::vector<RatingRecord> ratings{rec("u1", "a1", 0.2), rec("u,2", "a2", 0.6)};
    const auto dir = std::filesystem::temp_directory_path() / "kgep_test_roundtrip";
    std::filesystem::create_directories(dir);
    write_dataset(dir / "apps.csv", dir / "ratings.csv", apps, ratings);
    const auto back = load_dataset(dir / "apps.csv", dir / "ratings.csv");
    CHECK(back.apps == apps);
    CHECK(back.ratings == ratings);
    CHECK(back.skipped.empty());
    std::filesystem::remove_all(dir);
}

TEST_CASE("cold-start thresholds at the boundary") {
    std::vector<AppRecord> apps;
    std::vector<RatingRecord> ratings;
    // app "pop" has 10 raters, app "rare" has 9
    for (int i = 0; i < 10; ++i) apps.push_back(app("x" + std::to_string(i)));
    apps.push_back(app("rare"));
    for (int u = 0; u < 10; ++u) {
        for (int i = 0; i < 10; ++i) ratings.push_back(rec("u" + std::to_string(u), "x" + std::to_string(i)));
        if (u < 9) ratings.push_back(rec("u" + std::to_string(u), "rare"));
    }
    const auto r = filter_cold_start(apps, ratings, 10, 10);
    CHECK(r.apps.size() == 10);
    CHECK(std::none_of(r.ratings.begin(), r.ratings.end(), [](const auto& x) { return x.app_id == "rare"; }));
    CHECK(r.ratings.size() == 100);  // every user keeps exactly 10 apps
    CHECK(r.stable);
}

TEST_CASE("cold-start chain case: one pass of each, apps first") {
    // Three users. App "a" has 2 raters and falls below min_app = 3, which drops
    // u1 below min_user = 2 although u1 originally rated 2 apps. Removing u1
    // then leaves app "b" with 2 raters, which only a second pass would catch.
    std::vector<AppRecord> apps{app("a"), app("b"), app("c")};
    std::vector<RatingRecord> ratings{rec("u1", "a"), rec("u1", "b"), rec("u2", "a"), rec("u2", "c"),
                                      rec("u2", "b"), rec("u3", "b"), rec("u3", "c"), rec("u4", "c")};
    const auto r = filter_cold_start(apps, ratings, 2, 3);
    std::set<std::string> users;
    for (const auto& x : r.ratings) users.insert(x.user_id);
    CHECK(users == std::set<std::string>{"u2", "u3"});
    CHECK(r.ratings.size() == 4);
    CHECK_FALSE(r.stable);

    CHECK_THROWS_WITH(filter_cold_start(apps, ratings, 100, 1), "dataset empty after cold-start filtering");
}

TEST_CASE("rating matrix: sorted index space and dense reconstruction") {
    std::vector<RatingRecord> ratings{rec("u3", "b", 0.4), rec("u1", "a", 1.0), rec("u2", "b", 0.2), rec("u1", "b", 0.6)};
    const auto m = build_rating_matrix(ratings);
    CHECK(m.users() == std::vector<std::string>{"u1", "u2", "u3"});
    CHECK(m.apps() == std::vector<std::string>{"a", "b"});
    const double dense[3][2] = {{1.0, 0.6}, {0.0, 0.2}, {0.0, 0.4}};
    for (std::uint32_t u = 0; u < 3; ++u)
        for (std::uint32_t a = 0; a < 2; ++a) CHECK(m.value(u, a) == dense[u][a]);
    CHECK(m.nnz() == 4);
    CHECK(m.sparsity() == doctest::Approx(4.0 / 6.0));

    const auto single = build_rating_matrix(std::vector<RatingRecord>{rec("u1", "a1", 1.0)});
    CHECK(single.value(0, 0) == 1.0);
    CHECK_THROWS(build_rating_matrix(std::vector<RatingRecord>{rec("u1", "a1"), rec("u1", "a1")}));
}

TEST_CASE("sparsity report on a fixture built to a target density") {
    Rng rng(7);
    std::vector<RatingRecord> ratings;
    std::set<std::pair<int, int>> cells;
    while (cells.size() < 120) cells.insert({static_cast<int>(rng.index(40)), static_cast<int>(rng.index(50))});
    for (int u = 0; u < 40; ++u) cells.insert({u, 0});
    for (int a = 0; a < 50; ++a) cells.insert({0, a});
    for (const auto& [u, a] : cells) ratings.push_back(rec("u" + std::to_string(1000 + u), "a" + std::to_string(1000 + a), 0.8));
    const auto m = build_rating_matrix(ratings);
    CHECK(m.sparsity() == doctest::Approx(static_cast<double>(cells.size()) / (40.0 * 50.0)).epsilon(1e-15));
}

TEST_CASE("config defaults, overrides and validation") {
    EngineConfig c;
    CHECK(c.topics.topic_count == 50);
    CHECK(c.kg.cts == 0.9);
    CHECK(c.kg.us == 0.98);
    CHECK(c.transd.embed_dim == 16);
    CHECK(c.kgep.propagation_layers == 1);
    CHECK(c.kgep.learning_rate == 0.02);
    CHECK(c.kgep.epochs == 80);
    CHECK(c.transd.margin == 1.0);
    CHECK(c.kgep.negatives_per_positive == 4);
    CHECK(c.data.min_user_interactions == 10);
    CHECK(c.data.min_app_interactions == 10);
    CHECK_NOTHROW(c.validate());

    auto j = c.to_json();
    j["kg"]["cts"] = 0.5;
    const auto back = EngineConfig::from_json(j);
    CHECK(back.kg.cts == 0.5);
    CHECK(back.kgep.epochs == 80);

    nlohmann::json partial = {{"transd", {{"embed_dim", 8}}}};
    CHECK(EngineConfig::from_json(partial).transd.embed_dim == 8);
    CHECK(EngineConfig::from_json(partial).transd.margin == 1.0);

    CHECK_THROWS(EngineConfig::from_json({{"bogus", {}}}));
    for (double bad : {0.0, 1.0, 1.5}) {
        EngineConfig b;
        b.kg.cts = bad;
        CHECK_THROWS(b.validate());
        b = EngineConfig{};
        b.kg.us = bad;
        CHECK_THROWS(b.validate());
    }
    EngineConfig d;
    d.transd.embed_dim = 0;
    CHECK_THROWS(d.validate());
}

TEST_CASE("tokenizer and stemmer") {
    CHECK(text::tokenize("Hello, World! 3D-games") == std::vector<std::string>{"hello", "world", "3d", "games"});
    // Reference pairs from the published Porter vocabulary.
    const std::map<std::string, std::string> pairs{
        {"caresses", "caress"}, {"ponies", "poni"},       {"ties", "ti"},           {"cats", "cat"},
        {"feed", "feed"},       {"agreed", "agre"},       {"plastered", "plaster"}, {"motoring", "motor"},
        {"sing", "sing"},       {"conflated", "conflat"}, {"troubled", "troubl"},   {"sized", "size"},
        {"hopping", "hop"},     {"tanned", "tan"},        {"falling", "fall"},      {"hissing", "hiss"},
        {"fizzed", "fizz"},     {"failing", "fail"},      {"filing", "file"},       {"happy", "happi"},
        {"sky", "sky"},         {"relational", "relat"},  {"conditional", "condit"}, {"rational", "ration"},
        {"digitizer", "digit"}, {"operator", "oper"},     {"feudalism", "feudal"},  {"decisiveness", "decis"},
        {"hopefulness", "hope"}, {"formaliti", "formal"}, {"sensibiliti", "sensibl"}, {"triplicate", "triplic"},
        {"formative", "form"},  {"electrical", "electr"}, {"goodness", "good"},     {"revival", "reviv"},
        {"allowance", "allow"}, {"inference", "infer"},   {"airliner", "airlin"},   {"adjustable", "adjust"},
        {"defensible", "defens"}, {"replacement", "replac"}, {"adoption", "adopt"}, {"communism", "commun"},
        {"activate", "activ"},  {"effective", "effect"},  {"bowdlerize", "bowdler"}, {"probate", "probat"},
        {"rate", "rate"},       {"cease", "ceas"},        {"controll", "control"},  {"roll", "roll"},
        {"generalizations", "gener"}, {"oscillators", "oscil"}};
    for (const auto& [word, stem] : pairs) {
        INFO(word);
        CHECK(text::porter_stem(word) == stem);
    }
    CHECK(text::porter_stem("3d") == "3d");
    CHECK(text::english_stopwords().count("the"));
}
