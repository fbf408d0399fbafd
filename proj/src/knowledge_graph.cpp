#include "kgep/knowledge_graph.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace kgep {

namespace {

constexpr std::array<std::string_view, kEntityKindCount> kEntityNames = {
    "User",     "App", "ContentTopic", "Category", "Provider",    "Popularity", "AgeRestriction",
    "Ads",      "Fee", "InteractiveElements", "Quality", "UpdatedTime", "Size"};

constexpr std::array<std::string_view, kRelationKindCount> kRelationNames = {
    "INTERACT", "HAVINGCT", "HAVINGC",  "OFFEREDBY", "CONTENTR", "HAVINGA",   "HAVINGF",  "HAVINGIE", "HAVINGQ",
    "HAVINGP",  "HAVINGUT", "HAVINGS",  "USIMILAR",  "CTSIMILAR", "QSIMILAR", "PSIMILAR", "UTSIMILAR", "SSIMILAR"};

using EK = EntityKind;
constexpr std::array<RelationSignature, kRelationKindCount> kSignatures = {{
    {EK::User, EK::App},
    {EK::App, EK::ContentTopic},
    {EK::App, EK::Category},
    {EK::App, EK::Provider},
    {EK::App, EK::AgeRestriction},
    {EK::App, EK::Ads},
    {EK::App, EK::Fee},
    {EK::App, EK::InteractiveElements},
    {EK::App, EK::Quality},
    {EK::App, EK::Popularity},
    {EK::App, EK::UpdatedTime},
    {EK::App, EK::Size},
    {EK::User, EK::User},
    {EK::ContentTopic, EK::ContentTopic},
    {EK::Quality, EK::Quality},
    {EK::Popularity, EK::Popularity},
    {EK::UpdatedTime, EK::UpdatedTime},
    {EK::Size, EK::Size},
}};

}  // namespace

std::string_view to_string(EntityKind k) { return kEntityNames.at(static_cast<std::size_t>(k)); }
std::string_view to_string(RelationKind k) { return kRelationNames.at(static_cast<std::size_t>(k)); }

std::optional<EntityKind> parse_entity_kind(std::string_view s) {
    for (std::size_t i = 0; i < kEntityNames.size(); ++i)
        if (kEntityNames[i] == s) return static_cast<EntityKind>(i);
    return std::nullopt;
}

std::optional<RelationKind> parse_relation_kind(std::string_view s) {
    for (std::size_t i = 0; i < kRelationNames.size(); ++i)
        if (kRelationNames[i] == s) return static_cast<RelationKind>(i);
    return std::nullopt;
}

RelationSignature signature(RelationKind k) { return kSignatures.at(static_cast<std::size_t>(k)); }

bool is_similarity(RelationKind k) { return static_cast<std::size_t>(k) >= relation_id(RelationKind::USimilar); }

KnowledgeGraph::KnowledgeGraph(Schema schema, std::size_t relation_count)
    : schema_(schema), relation_count_(relation_count) {
    if (schema_ == Schema::Arkg && relation_count_ != kRelationKindCount) {
        throw std::invalid_argument("ARKG schema has exactly 18 relation kinds");
    }
}

EntityId KnowledgeGraph::add_entity(EntityKind kind, std::string label) {
    auto key = std::make_pair(kind, label);
    if (auto it = entity_lookup_.find(key); it != entity_lookup_.end()) return it->second;
    const auto id = static_cast<EntityId>(entities_.size());
    entities_.push_back({kind, std::move(label)});
    entity_lookup_.emplace(std::move(key), id);
    by_kind_[static_cast<std::size_t>(kind)].push_back(id);
    head_index_.emplace_back();
    return id;
}

std::optional<EntityId> KnowledgeGraph::find(EntityKind kind, std::string_view label) const {
    auto it = entity_lookup_.find(std::make_pair(kind, std::string(label)));
    if (it == entity_lookup_.end()) return std::nullopt;
    return it->second;
}

std::string KnowledgeGraph::describe(const Triple& t) const {
    auto name = [&](EntityId id) -> std::string {
        if (id >= entities_.size()) return "#" + std::to_string(id) + "(unknown)";
        const auto& e = entities_[id];
        return std::string(to_string(e.kind)) + ":" + e.label;
    };
    std::string rel = (schema_ == Schema::Arkg && t.relation < kRelationKindCount)
                          ? std::string(to_string(static_cast<RelationKind>(t.relation)))
                          : "r" + std::to_string(t.relation);
    return "(" + name(t.head) + ", " + rel + ", " + name(t.tail) + ")";
}

bool KnowledgeGraph::add_triple(const Triple& t) {
    if (t.head >= entities_.size() || t.tail >= entities_.size()) {
        throw std::invalid_argument("triple references unknown entity: " + describe(t));
    }
    if (t.relation >= relation_count_) {
        throw std::invalid_argument("triple references unknown relation: " + describe(t));
    }
    if (schema_ == Schema::Arkg) {
        const auto kind = static_cast<RelationKind>(t.relation);
        const auto sig = signature(kind);
        if (entities_[t.head].kind != sig.head || entities_[t.tail].kind != sig.tail) {
            throw std::invalid_argument("triple violates relation signature: " + describe(t));
        }
        if (is_similarity(kind) && t.head == t.tail) {
            throw std::invalid_argument("similarity self-loop: " + describe(t));
        }
    }
    if (!triple_set_.insert(t).second) return false;
    triples_.push_back(t);
    head_index_[t.head].push_back({t.relation, t.tail});
    return true;
}

std::size_t KnowledgeGraph::count(RelationId r) const {
    std::size_t n = 0;
    for (const auto& t : triples_) n += t.relation == r;
    return n;
}

void save_knowledge_graph(const std::filesystem::path& dir, const KnowledgeGraph& kg) {
    std::filesystem::create_directories(dir);
    std::ofstream ent(dir / "entities.tsv", std::ios::binary);
    for (EntityId i = 0; i < kg.entity_count(); ++i) {
        const auto& e = kg.entity(i);
        ent << i << '\t' << to_string(e.kind) << '\t' << e.label << '\n';
    }
    std::ofstream rel(dir / "relations.tsv", std::ios::binary);
    for (RelationId r = 0; r < kg.relation_count(); ++r) {
        rel << r << '\t'
            << (kg.schema() == KnowledgeGraph::Schema::Arkg ? std::string(to_string(static_cast<RelationKind>(r)))
                                                           : "r" + std::to_string(r))
            << '\n';
    }
    std::ofstream tri(dir / "triples.tsv", std::ios::binary);
    for (const auto& t : kg.triples()) tri << t.head << '\t' << t.relation << '\t' << t.tail << '\n';
    if (!ent || !rel || !tri) throw std::runtime_error("failed writing knowledge graph to " + dir.string());
}

KnowledgeGraph load_knowledge_graph(const std::filesystem::path& dir) {
    auto open = [&](const char* name) {
        std::ifstream in(dir / name);
        if (!in) throw std::runtime_error("cannot open " + (dir / name).string());
        return in;
    };

    auto rel = open("relations.tsv");
    std::size_t relation_count = 0;
    bool arkg = true;
    std::string line;
    while (std::getline(rel, line)) {
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos || std::stoul(line.substr(0, tab)) != relation_count) {
            throw std::runtime_error("relations.tsv: malformed line " + std::to_string(relation_count + 1));
        }
        auto kind = parse_relation_kind(line.substr(tab + 1));
        if (!kind || static_cast<std::size_t>(*kind) != relation_count) arkg = false;
        ++relation_count;
    }
    arkg = arkg && relation_count == kRelationKindCount;
    KnowledgeGraph kg(arkg ? KnowledgeGraph::Schema::Arkg : KnowledgeGraph::Schema::Untyped, relation_count);

    auto ent = open("entities.tsv");
    std::size_t n = 0;
    while (std::getline(ent, line)) {
        if (line.empty()) continue;
        auto t1 = line.find('\t');
        auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
        if (t2 == std::string::npos) throw std::runtime_error("entities.tsv: malformed line " + std::to_string(n + 1));
        if (std::stoul(line.substr(0, t1)) != n) throw std::runtime_error("entities.tsv: ids must be dense and ordered");
        auto kind = parse_entity_kind(line.substr(t1 + 1, t2 - t1 - 1));
        if (!kind) throw std::runtime_error("entities.tsv: unknown kind on line " + std::to_string(n + 1));
        if (kg.add_entity(*kind, line.substr(t2 + 1)) != n) {
            throw std::runtime_error("entities.tsv: duplicate entity on line " + std::to_string(n + 1));
        }
        ++n;
    }

    auto tri = open("triples.tsv");
    std::size_t lineno = 0;
    while (std::getline(tri, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        Triple t{};
        if (!(ss >> t.head >> t.relation >> t.tail)) {
            throw std::runtime_error("triples.tsv: malformed line " + std::to_string(lineno));
        }
        kg.add_triple(t);
    }
    return kg;
}

}  // namespace kgep
