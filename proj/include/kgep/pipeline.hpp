#pragma once

#include "kgep/config.hpp"
#include "kgep/evaluation.hpp"
#include "kgep/knowledge_graph.hpp"
#include "kgep/recommender.hpp"
#include "kgep/transd.hpp"

#include <json.hpp>

#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace kgep {

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// A stage failure; what() is prefixed with the stage name.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

// manifest.json in the work directory: per stage, the config hash, seed and
// the hashes of every input and output (paths relative to the work directory
// when inside it).
class Manifest {
public:
    static Manifest load(const std::filesystem::path& work_dir);
    void save() const;

    bool up_to_date(const std::string& stage, const std::string& config_hash,
                    const std::vector<std::filesystem::path>& inputs) const;
    void record(const std::string& stage, const std::string& config_hash, std::uint64_t seed,
                const std::vector<std::filesystem::path>& inputs, const std::vector<std::filesystem::path>& outputs);
    // Throws when `path` is a recorded output whose content has changed since.
    void verify_artifact(const std::filesystem::path& path) const;
    const nlohmann::json& json() const { return data_; }

private:
    std::filesystem::path dir_;
    nlohmann::json data_ = nlohmann::json::object();

    std::string key(const std::filesystem::path& p) const;
};

// Artifact locations under a work directory.
struct WorkLayout {
    std::filesystem::path root;

    std::filesystem::path data_dir() const { return root / "data"; }
    std::filesystem::path apps() const { return data_dir() / "apps.csv"; }
    std::filesystem::path ratings() const { return data_dir() / "ratings.csv"; }
    std::filesystem::path train() const { return data_dir() / "train.csv"; }
    std::filesystem::path validation() const { return data_dir() / "validation.csv"; }
    std::filesystem::path test() const { return data_dir() / "test.csv"; }
    std::filesystem::path ingest_report() const { return data_dir() / "ingest_report.json"; }
    std::filesystem::path topics_dir() const { return root / "topics"; }
    std::filesystem::path kg_dir() const { return root / "kg"; }
    std::filesystem::path transd() const { return root / "transd.ckpt"; }
    std::filesystem::path transd_log() const { return root / "transd_loss.tsv"; }
    std::filesystem::path kgep() const { return root / "kgep.ckpt"; }
    std::filesystem::path kgep_log() const { return root / "kgep_training.tsv"; }
    std::filesystem::path report() const { return root / "report.tsv"; }
};

// The user/app index space of the filtered ratings with its three partitions.
InteractionSplit load_split(const WorkLayout& layout);

struct EvaluateOptions {
    std::vector<std::string> models;  // empty: config
    std::vector<std::size_t> ks;      // empty: config
    std::filesystem::path out;        // empty: report.tsv in the work directory
};

class Pipeline {
public:
    // Progress goes to `log`.
    Pipeline(EngineConfig config, std::filesystem::path work_dir, bool force, std::ostream& log);

    // Each returns true when the stage ran, false when it was skipped.
    bool ingest(const std::filesystem::path& apps_csv, const std::filesystem::path& ratings_csv);
    bool build_topics();
    bool build_kg();
    bool train_transd();
    bool train_kgep();
    bool evaluate(const EvaluateOptions& options = {});

    // Every stage in order; returns the number of stages that ran.
    int run_all(const std::filesystem::path& apps_csv, const std::filesystem::path& ratings_csv,
                const EvaluateOptions& options = {});

    const WorkLayout& layout() const { return layout_; }
    const EngineConfig& config() const { return config_; }

private:
    EngineConfig config_;
    WorkLayout layout_;
    bool force_;
    std::ostream& log_;
    Manifest manifest_;

    template <typename Fn>
    bool run_stage(const std::string& name, const nlohmann::json& settings,
                   const std::vector<std::filesystem::path>& inputs, std::uint64_t seed, Fn body);
};

// Top-k recommendations for a user id, as rank, app_id, score TSV.
void write_recommendations(std::ostream& out, const KnowledgeGraph& kg, const KgepModel& model,
                           const std::string& user_id, int k, bool exclude_train);

}  // namespace kgep
