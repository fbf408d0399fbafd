#include "kgep/pipeline.hpp"

#include "kgep/arkg_builder.hpp"
#include "kgep/dataset.hpp"
#include "kgep/text.hpp"
#include "kgep/topic_model.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <memory>
#include <sstream>

namespace kgep {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& p, const std::string& content) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << content;
    if (!out) throw std::runtime_error("cannot write " + p.string());
}

std::vector<fs::path> directory_files(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file()) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<RatingRecord> read_ratings(const fs::path& p, std::span<const std::string> apps) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    std::vector<SkipEntry> skipped;
    auto ratings = parse_ratings(in, p.string(), apps, skipped);
    if (!skipped.empty()) throw std::runtime_error(p.string() + ": unexpected rows (" + skipped.front().reason + ")");
    return ratings;
}

std::vector<AppRecord> read_apps(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    return parse_apps(in, p.string());
}

RatingMatrix in_space(const RatingMatrix& full, std::span<const RatingRecord> ratings) {
    std::vector<std::vector<RatingMatrix::Entry>> rows(full.user_count());
    for (const auto& r : ratings) {
        const auto u = full.user_index(r.user_id);
        const auto a = full.app_index(r.app_id);
        if (!u || !a) throw std::runtime_error("split references an unknown user or app");
        rows[*u].push_back({*a, r.rating});
    }
    for (auto& row : rows) std::sort(row.begin(), row.end(), [](const auto& x, const auto& y) { return x.app < y.app; });
    return full.with_rows(std::move(rows));
}

std::vector<RatingRecord> to_records(const RatingMatrix& m) {
    std::vector<RatingRecord> out;
    for (std::uint32_t u = 0; u < m.user_count(); ++u)
        for (const auto& e : m.row(u)) out.push_back({m.users()[u], m.apps()[e.app], e.rating});
    return out;
}

std::string ratings_text(std::span<const RatingRecord> r) {
    std::ostringstream out;
    write_ratings(out, r);
    return out.str();
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr)) {
        throw std::runtime_error("SHA-256 failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

Manifest Manifest::load(const fs::path& work_dir) {
    Manifest m;
    m.dir_ = work_dir;
    const auto p = work_dir / "manifest.json";
    if (fs::exists(p)) {
        m.data_ = nlohmann::json::parse(read_file(p));
        if (!m.data_.is_object()) throw std::runtime_error(p.string() + ": manifest is not a JSON object");
    }
    return m;
}

void Manifest::save() const { write_file(dir_ / "manifest.json", data_.dump(2) + "\n"); }

std::string Manifest::key(const fs::path& p) const {
    const auto rel = fs::weakly_canonical(p).lexically_relative(fs::weakly_canonical(dir_));
    if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
    return fs::weakly_canonical(p).generic_string();
}

bool Manifest::up_to_date(const std::string& stage, const std::string& config_hash,
                          const std::vector<fs::path>& inputs) const {
    if (!data_.contains(stage)) return false;
    const auto& s = data_.at(stage);
    if (s.value("config_hash", "") != config_hash) return false;
    const auto& recorded = s.at("inputs");
    if (recorded.size() != inputs.size()) return false;
    for (const auto& in : inputs) {
        const auto k = key(in);
        if (!recorded.contains(k) || !fs::exists(in) || recorded.at(k) != sha256_file(in)) return false;
    }
    for (const auto& [k, hash] : s.at("outputs").items()) {
        const fs::path p = fs::path(k).is_absolute() ? fs::path(k) : dir_ / k;
        if (!fs::exists(p) || sha256_file(p) != hash) return false;
    }
    return true;
}

void Manifest::record(const std::string& stage, const std::string& config_hash, std::uint64_t seed,
                      const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
    nlohmann::json in = nlohmann::json::object(), out = nlohmann::json::object();
    for (const auto& p : inputs) in[key(p)] = sha256_file(p);
    for (const auto& p : outputs) out[key(p)] = sha256_file(p);
    data_[stage] = {{"config_hash", config_hash}, {"seed", seed}, {"inputs", in}, {"outputs", out}};
}

void Manifest::verify_artifact(const fs::path& path) const {
    const auto k = key(path);
    for (const auto& [stage, s] : data_.items()) {
        if (!s.contains("outputs") || !s.at("outputs").contains(k)) continue;
        if (!fs::exists(path)) throw std::runtime_error(k + " (produced by " + stage + ") is missing");
        if (sha256_file(path) != s.at("outputs").at(k)) {
            throw std::runtime_error(k + " no longer matches the output recorded for stage " + stage);
        }
    }
}

InteractionSplit load_split(const WorkLayout& layout) {
    const auto apps = read_apps(layout.apps());
    std::vector<std::string> ids;
    for (const auto& a : apps) ids.push_back(a.app_id);
    const auto full = build_rating_matrix(read_ratings(layout.ratings(), ids));
    InteractionSplit split;
    split.train = TrainingMatrix(in_space(full, read_ratings(layout.train(), ids)));
    split.validation = in_space(full, read_ratings(layout.validation(), ids));
    split.test = in_space(full, read_ratings(layout.test(), ids));
    return split;
}

Pipeline::Pipeline(EngineConfig config, fs::path work_dir, bool force, std::ostream& log)
    : config_(std::move(config)), layout_{std::move(work_dir)}, force_(force), log_(log) {
    config_.validate();
    fs::create_directories(layout_.root);
    manifest_ = Manifest::load(layout_.root);
}

template <typename Fn>
bool Pipeline::run_stage(const std::string& name, const nlohmann::json& settings, const std::vector<fs::path>& inputs,
                         std::uint64_t seed, Fn body) {
    const nlohmann::json keyed{{"settings", settings}, {"seed", seed}};
    const auto hash = sha256_hex(canonical_dump(keyed));
    try {
        for (const auto& in : inputs) {
            if (!fs::exists(in)) throw std::runtime_error("missing input " + in.string());
            manifest_.verify_artifact(in);
        }
        if (!force_ && manifest_.up_to_date(name, hash, inputs)) {
            log_ << "[" << name << "] up to date, skipped\n";
            return false;
        }
        log_ << "[" << name << "] running\n";
        const std::vector<fs::path> outputs = body();
        manifest_.record(name, hash, seed, inputs, outputs);
        manifest_.save();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
    return true;
}

bool Pipeline::ingest(const fs::path& apps_csv, const fs::path& ratings_csv) {
    const nlohmann::json settings{{"data", config_.data}};
    return run_stage("ingest", settings, {apps_csv, ratings_csv}, derive_seed(config_.seed, "split"), [&] {
        auto ds = load_dataset(apps_csv, ratings_csv);
        for (const auto& s : ds.skipped) log_ << "  skipped " << s.file << ":" << s.line << ": " << s.reason << "\n";
        auto filtered = filter_cold_start(ds.apps, ds.ratings, config_.data.min_user_interactions,
                                          config_.data.min_app_interactions);
        const auto matrix = build_rating_matrix(filtered.ratings);

        std::vector<AppRecord> apps;
        for (auto& a : filtered.apps)
            if (matrix.app_index(a.app_id)) apps.push_back(std::move(a));
        std::sort(apps.begin(), apps.end(), [](const auto& x, const auto& y) { return x.app_id < y.app_id; });

        const auto split = split_interactions(matrix, derive_seed(config_.seed, "split"));
        std::ostringstream apps_out;
        write_apps(apps_out, apps);
        write_file(layout_.apps(), apps_out.str());
        write_file(layout_.ratings(), ratings_text(to_records(matrix)));
        write_file(layout_.train(), ratings_text(to_records(split.train.matrix())));
        write_file(layout_.validation(), ratings_text(to_records(split.validation)));
        write_file(layout_.test(), ratings_text(to_records(split.test)));

        nlohmann::json report{{"users", matrix.user_count()},
                              {"apps", matrix.app_count()},
                              {"ratings", matrix.nnz()},
                              {"sparsity", matrix.sparsity()},
                              {"skipped_rows", ds.skipped.size()},
                              {"cold_start_stable", filtered.stable},
                              {"train", split.train.matrix().nnz()},
                              {"validation", split.validation.nnz()},
                              {"test", split.test.nnz()}};
        write_file(layout_.ingest_report(), report.dump(2) + "\n");
        log_ << "  " << matrix.user_count() << " users, " << matrix.app_count() << " apps, " << matrix.nnz()
             << " ratings, sparsity " << matrix.sparsity() << (filtered.stable ? "" : " (cold-start filter not at fixpoint)")
             << "\n";
        return std::vector<fs::path>{layout_.apps(), layout_.ratings(), layout_.train(), layout_.validation(),
                                     layout_.test(), layout_.ingest_report()};
    });
}

bool Pipeline::build_topics() {
    std::vector<fs::path> inputs{layout_.apps()};
    if (!config_.topics.stopwords_path.empty()) inputs.emplace_back(config_.topics.stopwords_path);
    const nlohmann::json settings{{"topics", config_.topics}};
    const auto seed = derive_seed(config_.seed, "lda");
    return run_stage("build-topics", settings, inputs, seed, [&] {
        const auto apps = read_apps(layout_.apps());
        std::vector<std::string> texts;
        for (const auto& a : apps) texts.push_back(a.readme_text);
        const auto stop = config_.topics.stopwords_path.empty() ? text::english_stopwords()
                                                                : text::load_stopwords(config_.topics.stopwords_path);
        const auto corpus = preprocess(texts, stop, config_.topics.min_term_count);
        if (corpus.empty_document_count() > 0) {
            log_ << "  " << corpus.empty_document_count() << " apps have no usable readme terms\n";
        }
        LdaOptions opt;
        opt.topic_count = config_.topics.topic_count;
        opt.alpha = config_.topics.effective_alpha();
        opt.beta = config_.topics.beta;
        opt.iterations = config_.topics.iterations;
        opt.seed = seed;
        const auto model = fit_lda(corpus, opt);
        fs::create_directories(layout_.topics_dir());
        save_topic_model(layout_.topics_dir(), model, corpus.vocabulary);
        return directory_files(layout_.topics_dir());
    });
}

bool Pipeline::build_kg() {
    auto inputs = std::vector<fs::path>{layout_.apps(), layout_.ratings(), layout_.train()};
    for (const auto& f : {"phi.tsv", "theta.tsv", "vocab.txt"}) inputs.push_back(layout_.topics_dir() / f);
    const nlohmann::json settings{{"kg", config_.kg}};
    return run_stage("build-kg", settings, inputs, 0, [&] {
        const auto apps = read_apps(layout_.apps());
        const auto split = load_split(layout_);
        const auto topics = load_topic_model(layout_.topics_dir());
        if (static_cast<std::size_t>(topics.theta.rows()) != apps.size()) {
            throw std::runtime_error("topic model does not cover the ingested apps; rerun build-topics");
        }
        const auto topic_of_app = assign_topics(topics);
        const auto kg = build_arkg(apps, split.train, topics, topic_of_app, config_.kg);
        fs::create_directories(layout_.kg_dir());
        save_knowledge_graph(layout_.kg_dir(), kg);
        log_ << "  " << kg.entity_count() << " entities, " << kg.triple_count() << " triples\n";
        return directory_files(layout_.kg_dir());
    });
}

bool Pipeline::train_transd() {
    std::vector<fs::path> inputs = {layout_.kg_dir() / "entities.tsv", layout_.kg_dir() / "relations.tsv",
                                    layout_.kg_dir() / "triples.tsv"};
    const nlohmann::json settings{{"transd", config_.transd}};
    const auto seed = derive_seed(config_.seed, "transd");
    return run_stage("train-transd", settings, inputs, seed, [&] {
        const auto kg = load_knowledge_graph(layout_.kg_dir());
        TransdTrainOptions opt;
        opt.dim = config_.transd.embed_dim;
        opt.epochs = config_.transd.epochs;
        opt.batch_size = config_.transd.batch_size;
        opt.learning_rate = config_.transd.learning_rate;
        opt.margin = config_.transd.margin;
        opt.seed = seed;
        const auto result = kgep::train_transd(kg, opt);
        save_transd(layout_.transd(), result.params);
        std::ostringstream loss;
        loss << "epoch\tloss\n";
        char buf[64];
        for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
            std::snprintf(buf, sizeof buf, "%zu\t%.9g\n", e + 1, result.epoch_loss[e]);
            loss << buf;
        }
        write_file(layout_.transd_log(), loss.str());
        if (!result.epoch_loss.empty()) {
            log_ << "  loss " << result.epoch_loss.front() << " -> " << result.epoch_loss.back() << "\n";
        }
        return std::vector<fs::path>{layout_.transd(), layout_.transd_log()};
    });
}

bool Pipeline::train_kgep() {
    std::vector<fs::path> inputs = {layout_.kg_dir() / "entities.tsv", layout_.kg_dir() / "relations.tsv",
                                    layout_.kg_dir() / "triples.tsv", layout_.transd(), layout_.apps(),
                                    layout_.ratings(), layout_.train(), layout_.validation()};
    const nlohmann::json settings{{"kgep", config_.kgep}};
    const auto seed = derive_seed(config_.seed, "kgep");
    return run_stage("train-kgep", settings, inputs, seed, [&] {
        const auto kg = load_knowledge_graph(layout_.kg_dir());
        const auto transd = load_transd(layout_.transd());
        const auto split = load_split(layout_);
        const auto k = static_cast<std::size_t>(config_.kgep.validation_k);
        KgepTrainHooks hooks;
        hooks.validate = [&](const KgepModel& model) {
            const KgepRecommender rec(kg, model, split.train);
            return mean_average_precision(rec, split.validation, k, config_.threads);
        };
        hooks.on_epoch = [&](int epoch, double loss, double val) {
            log_ << "  epoch " << epoch << " loss " << loss << " validation MAP@" << k << " " << val << "\n";
        };
        const auto result = kgep::train_kgep(kg, transd, config_.kgep, seed, hooks);
        save_model(layout_.kgep(), result.model);
        std::ostringstream log;
        log << "epoch\tloss\tvalidation_map\n";
        char buf[96];
        for (std::size_t e = 0; e < result.validation.size(); ++e) {
            const double loss = e == 0 ? 0.0 : result.epoch_loss[e - 1];
            std::snprintf(buf, sizeof buf, "%zu\t%.9g\t%.6f\n", e, loss, result.validation[e]);
            log << buf;
        }
        write_file(layout_.kgep_log(), log.str());
        return std::vector<fs::path>{layout_.kgep(), layout_.kgep_log()};
    });
}

bool Pipeline::evaluate(const EvaluateOptions& options) {
    const auto models = options.models.empty() ? config_.eval.models : options.models;
    std::vector<std::size_t> ks = options.ks;
    if (ks.empty())
        for (int k : config_.eval.ks) ks.push_back(static_cast<std::size_t>(k));
    const auto out = options.out.empty() ? layout_.report() : options.out;

    std::vector<fs::path> inputs = {layout_.apps(), layout_.ratings(), layout_.train(), layout_.test()};
    const bool need_kgep = std::find(models.begin(), models.end(), "kgep") != models.end();
    if (need_kgep) {
        for (const auto& f : {"entities.tsv", "relations.tsv", "triples.tsv"}) inputs.push_back(layout_.kg_dir() / f);
        inputs.push_back(layout_.kgep());
    }
    nlohmann::json settings{{"models", models}, {"ks", ks}, {"usercf_neighbors", config_.eval.usercf_neighbors},
                            {"out", out.generic_string()}};
    return run_stage("evaluate", settings, inputs, 0, [&] {
        const auto split = load_split(layout_);
        std::unique_ptr<KnowledgeGraph> kg;
        std::unique_ptr<KgepModel> model;
        std::vector<std::unique_ptr<Recommender>> recs;
        for (const auto& name : models) {
            if (name == "kgep") {
                kg = std::make_unique<KnowledgeGraph>(load_knowledge_graph(layout_.kg_dir()));
                model = std::make_unique<KgepModel>(load_model(layout_.kgep()));
                recs.push_back(std::make_unique<KgepRecommender>(*kg, *model, split.train));
            } else if (name == "usercf") {
                recs.push_back(std::make_unique<UserCfRecommender>(
                    split.train, user_similarity_matrix(split.train.matrix()),
                    static_cast<std::size_t>(config_.eval.usercf_neighbors)));
            } else if (name == "popularity") {
                recs.push_back(std::make_unique<PopularityRecommender>(split.train));
            } else {
                throw std::invalid_argument("unknown model '" + name + "' (expected kgep, usercf or popularity)");
            }
        }
        std::vector<const Recommender*> ptrs;
        for (const auto& r : recs) ptrs.push_back(r.get());
        const auto report = kgep::evaluate(ptrs, split.test, ks, config_.threads);
        std::ostringstream tsv;
        write_report(tsv, report);
        write_file(out, tsv.str());
        log_ << tsv.str();
        return std::vector<fs::path>{out};
    });
}

int Pipeline::run_all(const fs::path& apps_csv, const fs::path& ratings_csv, const EvaluateOptions& options) {
    int ran = 0;
    ran += ingest(apps_csv, ratings_csv);
    ran += build_topics();
    ran += build_kg();
    ran += train_transd();
    ran += train_kgep();
    ran += evaluate(options);
    return ran;
}

void write_recommendations(std::ostream& out, const KnowledgeGraph& kg, const KgepModel& model,
                           const std::string& user_id, int k, bool exclude_train) {
    const auto user = kg.find(EntityKind::User, user_id);
    if (!user) throw std::invalid_argument("unknown user '" + user_id + "'");
    out << "rank\tapp_id\tscore\n";
    char buf[64];
    int rank = 0;
    for (const auto& r : recommend(kg, model, *user, k, exclude_train)) {
        std::snprintf(buf, sizeof buf, "%.6f", r.score);
        out << ++rank << '\t' << kg.entity(r.app).label << '\t' << buf << '\n';
    }
}

}  // namespace kgep
