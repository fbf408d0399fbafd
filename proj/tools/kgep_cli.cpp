#include "kgep/config.hpp"
#include "kgep/dataset.hpp"
#include "kgep/pipeline.hpp"
#include "kgep/synthetic.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace kgep;

namespace {

struct Common {
    std::string config_path;
    std::string work = "kgep-work";
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    bool force = false;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config_path, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--work", c.work, "Work directory holding artifacts and manifest.json");
    cmd->add_option("--set", c.overrides, "Override a config field, e.g. kgep.epochs=20");
    cmd->add_option("--seed", c.seed, "Seed (overrides config and KGEP_SEED)");
    cmd->add_option("--threads", c.threads, "Worker threads for evaluation");
    cmd->add_flag("--force", c.force, "Rerun stages even when their inputs are unchanged");
}

// Dotted path into the config JSON; the value is parsed as JSON when possible.
void apply_override(nlohmann::json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw std::invalid_argument("--set expects key=value, got '" + assignment + "'");
    std::string pointer = "/" + assignment.substr(0, eq);
    std::replace(pointer.begin(), pointer.end(), '.', '/');
    const auto text = assignment.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    const nlohmann::json::json_pointer ptr(pointer);
    if (!j.contains(ptr)) throw std::invalid_argument("--set: unknown config field '" + assignment.substr(0, eq) + "'");
    j[ptr] = value;
}

EngineConfig resolve_config(const Common& c) {
    EngineConfig cfg = c.config_path.empty() ? EngineConfig{} : load_config(c.config_path);
    if (const char* env = std::getenv("KGEP_SEED"); env && *env) {
        try {
            std::size_t used = 0;
            cfg.seed = std::stoull(env, &used);
            if (env[used] != '\0') throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw std::invalid_argument(std::string("KGEP_SEED is not an unsigned integer: ") + env);
        }
    }
    if (!c.overrides.empty()) {
        auto j = cfg.to_json();
        for (const auto& o : c.overrides) apply_override(j, o);
        cfg = EngineConfig::from_json(j);
    }
    if (c.seed) cfg.seed = *c.seed;
    if (c.threads) cfg.threads = *c.threads;
    cfg.validate();
    return cfg;
}

std::vector<std::size_t> parse_ks(const std::string& s) {
    std::vector<std::size_t> ks;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        std::size_t used = 0;
        const long k = std::stol(item, &used);
        if (used != item.size() || k < 1) throw std::invalid_argument("--ks expects positive integers, got '" + item + "'");
        ks.push_back(static_cast<std::size_t>(k));
    }
    return ks;
}

std::vector<std::string> parse_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Knowledge-graph app recommender: ingestion, topics, ARKG, TransD, KGEP, evaluation"};
    app.require_subcommand(1);

    Common common;
    std::string apps_csv, ratings_csv;
    std::string eval_models, eval_ks, eval_out;
    std::string user;
    int k = 10;
    bool include_train = false;
    std::string rec_out;
    std::string kg_path, transd_out;

    auto* ingest = app.add_subcommand("ingest", "Validate, cold-start filter and split the raw CSV files");
    auto* topics = app.add_subcommand("build-topics", "Fit the LDA topic model over readme texts");
    auto* build_kg = app.add_subcommand("build-kg", "Construct the ARKG from the training split");
    auto* transd = app.add_subcommand("train-transd", "Learn TransD embeddings of the ARKG");
    auto* kgep_train = app.add_subcommand("train-kgep", "Train the propagation model");
    auto* evaluate = app.add_subcommand("evaluate", "Score models on the test split");
    auto* recommend = app.add_subcommand("recommend", "Top-K apps for one user");
    auto* pipeline = app.add_subcommand("pipeline", "Run every stage in order");
    auto* generate = app.add_subcommand("generate", "Write a planted-cluster synthetic dataset");

    for (auto* cmd : {ingest, topics, build_kg, transd, kgep_train, evaluate, recommend, pipeline}) add_common(cmd, common);
    for (auto* cmd : {ingest, pipeline}) {
        cmd->add_option("--apps", apps_csv, "apps.csv")->required()->check(CLI::ExistingFile);
        cmd->add_option("--ratings", ratings_csv, "ratings.csv")->required()->check(CLI::ExistingFile);
    }
    for (auto* cmd : {evaluate, pipeline}) {
        cmd->add_option("--models", eval_models, "Comma-separated models: kgep,usercf,popularity");
        cmd->add_option("--ks", eval_ks, "Comma-separated cutoffs, e.g. 10,20,30,40");
        cmd->add_option("--out", eval_out, "Report path (default: report.tsv in the work directory)");
    }
    transd->add_option("--kg", kg_path, "Standalone mode: KG directory or its triples.tsv");
    transd->add_option("--out", transd_out, "Standalone mode: checkpoint path");
    recommend->add_option("--user", user, "User id")->required();
    recommend->add_option("--k", k, "Number of apps")->check(CLI::PositiveNumber);
    recommend->add_flag("--include-train", include_train, "Keep the user's training apps");
    recommend->add_option("--out", rec_out, "Write TSV here instead of standard output");

    SyntheticSpec spec;
    std::string gen_dir = ".";
    std::uint64_t gen_seed = 2020;
    generate->add_option("--out-dir", gen_dir, "Directory for apps.csv and ratings.csv");
    generate->add_option("--seed", gen_seed, "Generator seed");
    generate->add_option("--clusters", spec.clusters);
    generate->add_option("--users-per-cluster", spec.users_per_cluster);
    generate->add_option("--apps-per-cluster", spec.apps_per_cluster);
    generate->add_option("--p-in", spec.p_in);
    generate->add_option("--p-out", spec.p_out);
    generate->add_option("--vocabulary", spec.vocabulary_per_cluster);
    generate->add_option("--readme-words", spec.readme_words);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (generate->parsed()) {
            const auto ds = generate_synthetic(spec, gen_seed);
            fs::create_directories(gen_dir);
            write_dataset(fs::path(gen_dir) / "apps.csv", fs::path(gen_dir) / "ratings.csv", ds.apps, ds.ratings);
            std::cerr << "wrote " << ds.apps.size() << " apps and " << ds.ratings.size() << " ratings to " << gen_dir
                      << "\n";
            return 0;
        }

        const auto cfg = resolve_config(common);
        if (transd->parsed() && (!kg_path.empty() || !transd_out.empty())) {
            if (kg_path.empty() || transd_out.empty()) throw std::invalid_argument("standalone train-transd needs both --kg and --out");
            fs::path dir = kg_path;
            if (fs::is_regular_file(dir)) dir = dir.parent_path();
            const auto kg = load_knowledge_graph(dir);
            TransdTrainOptions opt;
            opt.dim = cfg.transd.embed_dim;
            opt.epochs = cfg.transd.epochs;
            opt.batch_size = cfg.transd.batch_size;
            opt.learning_rate = cfg.transd.learning_rate;
            opt.margin = cfg.transd.margin;
            opt.seed = derive_seed(cfg.seed, "transd");
            save_transd(transd_out, train_transd(kg, opt).params);
            return 0;
        }
        if (recommend->parsed()) {
            const WorkLayout layout{common.work};
            const auto manifest = Manifest::load(layout.root);
            manifest.verify_artifact(layout.kgep());
            const auto kg = load_knowledge_graph(layout.kg_dir());
            const auto model = load_model(layout.kgep());
            if (rec_out.empty()) {
                write_recommendations(std::cout, kg, model, user, k, !include_train);
            } else {
                std::ofstream out(rec_out);
                write_recommendations(out, kg, model, user, k, !include_train);
                if (!out) throw std::runtime_error("cannot write " + rec_out);
            }
            return 0;
        }

        Pipeline p(cfg, common.work, common.force, std::cerr);
        EvaluateOptions eo;
        eo.models = parse_list(eval_models);
        eo.ks = parse_ks(eval_ks);
        eo.out = eval_out;
        if (ingest->parsed()) p.ingest(apps_csv, ratings_csv);
        else if (topics->parsed()) p.build_topics();
        else if (build_kg->parsed()) p.build_kg();
        else if (transd->parsed()) p.train_transd();
        else if (kgep_train->parsed()) p.train_kgep();
        else if (evaluate->parsed()) p.evaluate(eo);
        else if (pipeline->parsed()) p.run_all(apps_csv, ratings_csv, eo);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
