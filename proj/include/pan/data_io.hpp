#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pan/graph.hpp"

namespace pan {

struct Splits {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
  std::vector<std::size_t> test;

  friend bool operator==(const Splits&, const Splits&) = default;
};

struct Dataset {
  std::vector<Graph> graphs;
  Splits splits;
  std::vector<std::size_t> node_cardinalities;
  std::vector<std::size_t> edge_cardinalities;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

using WarningSink = std::function<void(const std::string&)>;

/// Prints "warning: ..." to stderr.
void default_warning_sink(const std::string& message);

/// Reads the OGB raw CSV layout: edge.csv, num-node-list.csv,
/// num-edge-list.csv, node-feat.csv, edge-feat.csv, graph-label.csv and
/// train/valid/test.csv. Each file may be gzip-compressed (".csv.gz").
/// Files are looked up in `dir`, then `dir/raw` for graph data and
/// `dir/split/scaffold` for splits.
Dataset load_ogb_raw(const std::filesystem::path& dir, const WarningSink& warn = default_warning_sink);

Dataset load_json_graphs(const std::filesystem::path& file);
/// Throws SchemaViolation with the JSON pointer of the offending element.
Dataset parse_json_graphs(const nlohmann::json& doc);
nlohmann::json dataset_to_json(const Dataset& ds);
void save_json_graphs(const std::filesystem::path& file, const Dataset& ds);

/// Per-field max code + 1 over all graphs; stored on `ds` and returned.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> infer_cardinalities(Dataset& ds);

/// Throws SchemaViolation if split indices overlap or are out of range.
void validate_splits(const Dataset& ds);

enum class SyntheticTask { TriangleDetection };

/// Labelled toy graphs: half contain a triangle (label 1), half are
/// triangle-free (label 0). 5-10 nodes, one constant node and edge feature
/// field, all graphs in the train split.
Dataset make_synthetic(SyntheticTask task, std::size_t n_graphs, std::uint64_t seed);

}  // namespace pan
