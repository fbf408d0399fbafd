#pragma once

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace kgep {

struct DataConfig {
    int min_user_interactions = 10;
    int min_app_interactions = 10;
};

struct TopicConfig {
    int topic_count = 50;
    double alpha = 0.0;  // <= 0 selects 50 / topic_count
    double beta = 0.01;
    int iterations = 300;
    int min_term_count = 5;
    std::string stopwords_path;  // empty: built-in English list

    double effective_alpha() const { return alpha > 0.0 ? alpha : 50.0 / topic_count; }
};

struct KgConfig {
    double cts = 0.9;
    double us = 0.98;
    // Threshold the raw Hellinger distance instead of 1 - distance.
    bool ct_threshold_on_distance = false;
};

struct TransdConfig {
    int embed_dim = 16;
    int epochs = 100;
    int batch_size = 1024;
    double learning_rate = 0.3;
    double margin = 1.0;
};

struct KgepConfig {
    int propagation_layers = 1;
    double learning_rate = 0.02;
    int epochs = 80;
    int batch_size = 256;
    int negatives_per_positive = 4;
    double l2_lambda = 1.0;
    int max_neighbors = 0;  // 0: unlimited
    bool raw_score = false;
    int validation_k = 10;
};

struct EvalConfig {
    std::vector<int> ks{10, 20, 30, 40};
    std::vector<std::string> models{"kgep", "usercf", "popularity"};
    int usercf_neighbors = 0;  // 0: all users
};

struct EngineConfig {
    std::uint64_t seed = 2020;
    int threads = 1;
    DataConfig data;
    TopicConfig topics;
    KgConfig kg;
    TransdConfig transd;
    KgepConfig kgep;
    EvalConfig eval;

    // Throws std::invalid_argument naming the first offending field.
    void validate() const;

    nlohmann::json to_json() const;
    static EngineConfig from_json(const nlohmann::json& j);
};

void to_json(nlohmann::json& j, const DataConfig& c);
void from_json(const nlohmann::json& j, DataConfig& c);
void to_json(nlohmann::json& j, const TopicConfig& c);
void from_json(const nlohmann::json& j, TopicConfig& c);
void to_json(nlohmann::json& j, const KgConfig& c);
void from_json(const nlohmann::json& j, KgConfig& c);
void to_json(nlohmann::json& j, const TransdConfig& c);
void from_json(const nlohmann::json& j, TransdConfig& c);
void to_json(nlohmann::json& j, const KgepConfig& c);
void from_json(const nlohmann::json& j, KgepConfig& c);
void to_json(nlohmann::json& j, const EvalConfig& c);
void from_json(const nlohmann::json& j, EvalConfig& c);

EngineConfig load_config(const std::string& path);

// Canonical serialization of one config section; used for stage hashing.
std::string canonical_dump(const nlohmann::json& j);

}  // namespace kgep
