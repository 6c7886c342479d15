#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bioembed/manifest.hpp"

namespace bioembed {

struct Taxon {
    std::string genus;
    std::string family;
    std::string order;

    bool operator==(const Taxon&) const = default;
};

enum class TaxonLevel { kSpecies, kGenus, kFamily, kOrder };

TaxonLevel parse_taxon_level(const std::string& name);
std::string to_string(TaxonLevel level);

class LabelVocabulary {
public:
    LabelVocabulary() = default;
    explicit LabelVocabulary(std::vector<std::string> classes,
                             std::optional<std::map<std::string, Taxon>> taxonomy = std::nullopt);

    // Sorted unique labels of every record in `records`.
    static LabelVocabulary from_records(const std::vector<RecordingMeta>& records);

    const std::vector<std::string>& classes() const { return classes_; }
    std::size_t size() const { return classes_.size(); }
    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    // Throws ValidationError for unknown names.
    int id(const std::string& name) const;
    const std::string& name(int id) const { return classes_.at(static_cast<std::size_t>(id)); }

    const std::optional<std::map<std::string, Taxon>>& taxonomy() const { return taxonomy_; }
    void set_taxonomy(std::map<std::string, Taxon> taxonomy) { taxonomy_ = std::move(taxonomy); }

    bool operator==(const LabelVocabulary& other) const {
        return classes_ == other.classes_ && taxonomy_ == other.taxonomy_;
    }

private:
    std::vector<std::string> classes_;
    std::map<std::string, int> index_;
    std::optional<std::map<std::string, Taxon>> taxonomy_;
};

struct Coarsening {
    LabelVocabulary vocab;
    std::vector<int> old_to_new;  // total; surjective onto vocab
};

// Classes of the new vocabulary are the distinct ancestors at `level`, in order
// of first appearance over the old class order.
Coarsening coarsen_labels(const LabelVocabulary& vocab, TaxonLevel level);

// JSON-lines with fields species, genus, family, order.
std::map<std::string, Taxon> load_taxonomy(const std::filesystem::path& path);

// Rewrites every label (and annotation label) through the coarsening.
std::vector<RecordingMeta> relabel(const std::vector<RecordingMeta>& records,
                                   const LabelVocabulary& old_vocab, const Coarsening& coarse);

}  // namespace bioembed
