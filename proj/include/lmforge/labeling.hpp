#pragma once

#include <span>

#include "lmforge/core.hpp"
#include "lmforge/forest.hpp"
#include "lmforge/ingest.hpp"

namespace lmforge {

// Joins every host log against the forest. An event is labeled by a tree
// when its pid is a member and its timestamp lies in [member first_seen,
// extended window end]. 4688 events additionally require the creation to be
// part of the tree (parent is a member, or the pid is the tree root), so a
// recycled pid created outside the tree is not claimed. Events matched by
// several trees receive one record per tree.
std::vector<LabelRecord> label_system_logs(const Forest& forest, const EventStore& store);

std::map<StepKey, std::size_t> summarize_labels(std::span<const LabelRecord> labels);

void write_labels_jsonl(const std::filesystem::path& path, std::span<const LabelRecord> labels);
std::vector<LabelRecord> load_labels_jsonl(const std::filesystem::path& path);

}  // namespace lmforge
