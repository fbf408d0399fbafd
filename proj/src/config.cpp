#include "kgep/config.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace kgep {

// Same as NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT, with external linkage.
#define KGEP_JSON_SECTION(Type, ...)                                                                   \
    void to_json(nlohmann::json& nlohmann_json_j, const Type& nlohmann_json_t) {                       \
        NLOHMANN_JSON_EXPAND(NLOHMANN_JSON_PASTE(NLOHMANN_JSON_TO, __VA_ARGS__))                       \
    }                                                                                                  \
    void from_json(const nlohmann::json& nlohmann_json_j, Type& nlohmann_json_t) {                     \
        const Type nlohmann_json_default_obj{};                                                        \
        NLOHMANN_JSON_EXPAND(NLOHMANN_JSON_PASTE(NLOHMANN_JSON_FROM_WITH_DEFAULT, __VA_ARGS__))        \
    }

KGEP_JSON_SECTION(DataConfig, min_user_interactions, min_app_interactions)
KGEP_JSON_SECTION(TopicConfig, topic_count, alpha, beta, iterations,
                  min_term_count, stopwords_path)
KGEP_JSON_SECTION(KgConfig, cts, us, ct_threshold_on_distance)
KGEP_JSON_SECTION(TransdConfig, embed_dim, epochs, batch_size,
                  learning_rate, margin)
KGEP_JSON_SECTION(KgepConfig, propagation_layers, learning_rate, epochs,
                  batch_size, negatives_per_positive, l2_lambda,
                  max_neighbors, raw_score, validation_k)
KGEP_JSON_SECTION(EvalConfig, ks, models, usercf_neighbors)

namespace {

void require(bool ok, const char* field, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("config: ") + field + " " + what);
}

}  // namespace

void EngineConfig::validate() const {
    require(threads >= 1, "threads", "must be >= 1");
    require(data.min_user_interactions >= 1, "data.min_user_interactions", "must be >= 1");
    require(data.min_app_interactions >= 1, "data.min_app_interactions", "must be >= 1");
    require(topics.topic_count >= 2, "topics.topic_count", "must be >= 2");
    require(topics.beta > 0.0, "topics.beta", "must be positive");
    require(topics.iterations >= 1, "topics.iterations", "must be >= 1");
    require(topics.min_term_count >= 1, "topics.min_term_count", "must be >= 1");
    require(kg.cts > 0.0 && kg.cts < 1.0, "kg.cts", "must lie in (0,1)");
    require(kg.us > 0.0 && kg.us < 1.0, "kg.us", "must lie in (0,1)");
    require(transd.embed_dim >= 1, "transd.embed_dim", "must be >= 1");
    require(transd.epochs >= 1, "transd.epochs", "must be >= 1");
    require(transd.batch_size >= 1, "transd.batch_size", "must be >= 1");
    require(transd.learning_rate > 0.0, "transd.learning_rate", "must be positive");
    require(transd.margin > 0.0, "transd.margin", "must be positive");
    require(kgep.propagation_layers >= 0, "kgep.propagation_layers", "must be >= 0");
    require(kgep.learning_rate > 0.0, "kgep.learning_rate", "must be positive");
    require(kgep.epochs >= 1, "kgep.epochs", "must be >= 1");
    require(kgep.batch_size >= 1, "kgep.batch_size", "must be >= 1");
    require(kgep.negatives_per_positive >= 1, "kgep.negatives_per_positive", "must be >= 1");
    require(kgep.l2_lambda >= 0.0, "kgep.l2_lambda", "must be >= 0");
    require(kgep.max_neighbors >= 0, "kgep.max_neighbors", "must be >= 0");
    require(kgep.validation_k >= 1, "kgep.validation_k", "must be >= 1");
    require(!eval.ks.empty(), "eval.ks", "must not be empty");
    for (int k : eval.ks) require(k >= 1, "eval.ks", "entries must be >= 1");
    require(eval.usercf_neighbors >= 0, "eval.usercf_neighbors", "must be >= 0");
}

nlohmann::json EngineConfig::to_json() const {
    return nlohmann::json{{"seed", seed},   {"threads", threads}, {"data", data},
                          {"topics", topics}, {"kg", kg},         {"transd", transd},
                          {"kgep", kgep},   {"eval", eval}};
}

EngineConfig EngineConfig::from_json(const nlohmann::json& j) {
    EngineConfig c;
    if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
    for (const auto& [key, _] : j.items()) {
        static const char* known[] = {"seed", "threads", "data", "topics", "kg", "transd", "kgep", "eval"};
        if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
            throw std::invalid_argument("config: unknown section '" + key + "'");
        }
    }
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    if (j.contains("data")) c.data = j.at("data").get<DataConfig>();
    if (j.contains("topics")) c.topics = j.at("topics").get<TopicConfig>();
    if (j.contains("kg")) c.kg = j.at("kg").get<KgConfig>();
    if (j.contains("transd")) c.transd = j.at("transd").get<TransdConfig>();
    if (j.contains("kgep")) c.kgep = j.at("kgep").get<KgepConfig>();
    if (j.contains("eval")) c.eval = j.at("eval").get<EvalConfig>();
    c.validate();
    return c;
}

EngineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("config " + path + ": " + e.what());
    }
    return EngineConfig::from_json(j);
}

std::string canonical_dump(const nlohmann::json& j) {
    // nlohmann::json objects are key-sorted, so dump() is already canonical.
    return j.dump();
}

}  // namespace kgep
