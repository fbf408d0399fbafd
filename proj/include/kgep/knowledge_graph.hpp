#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kgep {

enum class EntityKind : std::uint8_t {
    User,
    App,
    ContentTopic,
    Category,
    Provider,
    Popularity,
    AgeRestriction,
    Ads,
    Fee,
    InteractiveElements,
    Quality,
    UpdatedTime,
    Size,
};
inline constexpr std::size_t kEntityKindCount = 13;

enum class RelationKind : std::uint8_t {
    Interact,
    HavingCt,
    HavingC,
    OfferedBy,
    ContentR,
    HavingA,
    HavingF,
    HavingIe,
    HavingQ,
    HavingP,
    HavingUt,
    HavingS,
    USimilar,
    CtSimilar,
    QSimilar,
    PSimilar,
    UtSimilar,
    SSimilar,
};
inline constexpr std::size_t kRelationKindCount = 18;

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

constexpr RelationId relation_id(RelationKind k) { return static_cast<RelationId>(k); }

std::string_view to_string(EntityKind k);
std::string_view to_string(RelationKind k);
std::optional<EntityKind> parse_entity_kind(std::string_view s);
std::optional<RelationKind> parse_relation_kind(std::string_view s);

struct RelationSignature {
    EntityKind head;
    EntityKind tail;
};
RelationSignature signature(RelationKind k);
bool is_similarity(RelationKind k);

struct Triple {
    EntityId head;
    RelationId relation;
    EntityId tail;
    auto operator<=>(const Triple&) const = default;
};

struct Neighbor {
    RelationId relation;
    EntityId tail;
    bool operator==(const Neighbor&) const = default;
};

struct Entity {
    EntityKind kind;
    std::string label;
};

// Directed typed triple store with a head index (the neighborhood N_v).
//
// With Schema::Arkg every triple is checked against its relation's
// (head kind, tail kind) signature and similarity self-loops are rejected.
// Schema::Untyped accepts any relation id below relation_count; it exists for
// synthetic graphs in tests and tools.
class KnowledgeGraph {
public:
    enum class Schema { Arkg, Untyped };

    explicit KnowledgeGraph(Schema schema = Schema::Arkg, std::size_t relation_count = kRelationKindCount);

    // Returns the existing id when (kind, label) is already present.
    EntityId add_entity(EntityKind kind, std::string label);
    std::optional<EntityId> find(EntityKind kind, std::string_view label) const;

    // Returns false for an exact duplicate. Throws std::invalid_argument on a
    // schema violation, naming the triple.
    bool add_triple(const Triple& t);
    bool add_triple(EntityId head, RelationKind r, EntityId tail) { return add_triple({head, relation_id(r), tail}); }

    Schema schema() const { return schema_; }
    std::size_t entity_count() const { return entities_.size(); }
    std::size_t relation_count() const { return relation_count_; }
    std::size_t triple_count() const { return triples_.size(); }
    const Entity& entity(EntityId id) const { return entities_.at(id); }
    std::span<const Triple> triples() const { return triples_; }
    std::span<const Neighbor> neighbors(EntityId v) const { return head_index_.at(v); }
    std::span<const EntityId> entities_of_kind(EntityKind k) const { return by_kind_[static_cast<std::size_t>(k)]; }
    bool contains(const Triple& t) const { return triple_set_.count(t) != 0; }
    std::size_t count(RelationId r) const;

    std::string describe(const Triple& t) const;

private:
    Schema schema_;
    std::size_t relation_count_;
    std::vector<Entity> entities_;
    std::map<std::pair<EntityKind, std::string>, EntityId, std::less<>> entity_lookup_;
    std::array<std::vector<EntityId>, kEntityKindCount> by_kind_;
    std::vector<Triple> triples_;
    std::set<Triple> triple_set_;
    std::vector<std::vector<Neighbor>> head_index_;
};

// triples.tsv (head_id, relation_id, tail_id), entities.tsv (id, kind, label)
// and relations.tsv (id, kind name) under `dir`.
void save_knowledge_graph(const std::filesystem::path& dir, const KnowledgeGraph& kg);
KnowledgeGraph load_knowledge_graph(const std::filesystem::path& dir);

}  // namespace kgep
