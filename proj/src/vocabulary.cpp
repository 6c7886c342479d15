#include "bioembed/vocabulary.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bioembed/errors.hpp"

namespace bioembed {

TaxonLevel parse_taxon_level(const std::string& name) {
    if (name == "species") return TaxonLevel::kSpecies;
    if (name == "genus") return TaxonLevel::kGenus;
    if (name == "family") return TaxonLevel::kFamily;
    if (name == "order") return TaxonLevel::kOrder;
    throw UsageError("unknown taxonomic level '" + name + "' (expected species|genus|family|order)");
}

std::string to_string(TaxonLevel level) {
    switch (level) {
        case TaxonLevel::kSpecies: return "species";
        case TaxonLevel::kGenus: return "genus";
        case TaxonLevel::kFamily: return "family";
        case TaxonLevel::kOrder: return "order";
    }
    return "species";
}

LabelVocabulary::LabelVocabulary(std::vector<std::string> classes,
                                 std::optional<std::map<std::string, Taxon>> taxonomy)
    : classes_(std::move(classes)), taxonomy_(std::move(taxonomy)) {
    for (std::size_t i = 0; i < classes_.size(); ++i) {
        if (!index_.emplace(classes_[i], static_cast<int>(i)).second) {
            throw ValidationError("duplicate class '" + classes_[i] + "' in vocabulary");
        }
    }
}

LabelVocabulary LabelVocabulary::from_records(const std::vector<RecordingMeta>& records) {
    std::set<std::string> names;
    for (const auto& r : records) names.insert(r.labels.begin(), r.labels.end());
    return LabelVocabulary(std::vector<std::string>(names.begin(), names.end()));
}

int LabelVocabulary::id(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValidationError("unknown label '" + name + "'");
    return it->second;
}

Coarsening coarsen_labels(const LabelVocabulary& vocab, TaxonLevel level) {
    Coarsening out;
    if (level == TaxonLevel::kSpecies) {
        out.vocab = vocab;
        out.old_to_new.resize(vocab.size());
        for (std::size_t i = 0; i < vocab.size(); ++i) out.old_to_new[i] = static_cast<int>(i);
        return out;
    }
    if (!vocab.taxonomy()) throw ValidationError("coarsening requires a taxonomy");
    const auto& tax = *vocab.taxonomy();

    std::vector<std::string> names;
    std::map<std::string, int> ids;
    std::map<std::string, Taxon> coarse_tax;
    for (const auto& cls : vocab.classes()) {
        auto it = tax.find(cls);
        if (it == tax.end()) throw ValidationError("missing taxonomy entry for class '" + cls + "'");
        const Taxon& t = it->second;
        std::string ancestor;
        Taxon entry;
        switch (level) {
            case TaxonLevel::kGenus:
                ancestor = t.genus;
                entry = t;
                break;
            case TaxonLevel::kFamily:
                ancestor = t.family;
                entry = {t.family, t.family, t.order};
                break;
            default:
                ancestor = t.order;
                entry = {t.order, t.order, t.order};
                break;
        }
        if (ancestor.empty()) throw ValidationError("empty " + to_string(level) + " for class '" + cls + "'");
        auto [pos, inserted] = ids.emplace(ancestor, static_cast<int>(names.size()));
        if (inserted) {
            names.push_back(ancestor);
            coarse_tax.emplace(ancestor, entry);
        } else if (coarse_tax.at(ancestor) != entry) {
            throw ValidationError("inconsistent taxonomy: '" + cls + "' places " + to_string(level) +
                                  " '" + ancestor + "' under a different lineage");
        }
        out.old_to_new.push_back(pos->second);
    }
    out.vocab = LabelVocabulary(std::move(names), std::move(coarse_tax));
    return out;
}

std::map<std::string, Taxon> load_taxonomy(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open taxonomy: " + path.string());
    std::map<std::string, Taxon> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = nlohmann::json::parse(line);
            out[j.at("species").get<std::string>()] = {j.at("genus").get<std::string>(),
                                                       j.at("family").get<std::string>(),
                                                       j.at("order").get<std::string>()};
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("taxonomy line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::vector<RecordingMeta> relabel(const std::vector<RecordingMeta>& records,
                                   const LabelVocabulary& old_vocab, const Coarsening& coarse) {
    auto map_name = [&](const std::string& n) {
        return coarse.vocab.name(coarse.old_to_new.at(static_cast<std::size_t>(old_vocab.id(n))));
    };
    std::vector<RecordingMeta> out = records;
    for (auto& r : out) {
        std::vector<std::string> labels;
        std::set<std::string> seen;
        for (const auto& l : r.labels) {
            auto n = map_name(l);
            if (seen.insert(n).second) labels.push_back(std::move(n));
        }
        r.labels = std::move(labels);
        if (r.annotations) {
            for (auto& a : *r.annotations) a.label = map_name(a.label);
        }
    }
    return out;
}

}  // namespace bioembed
