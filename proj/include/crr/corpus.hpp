#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include <json.hpp>

#include "crr/types.hpp"

namespace crr {

// Tasks and candidate pools are stored one JSON object per line (UTF-8).
// Blank lines are skipped; any other malformed line raises ParseError with
// its 1-based line number.

std::vector<TaskInstance> parse_corpus(std::istream& in);
std::vector<TaskInstance> load_corpus(const std::filesystem::path& path);
void save_corpus(std::span<const TaskInstance> tasks,
                 const std::filesystem::path& path);

std::vector<Candidate> parse_pool(std::istream& in);
std::vector<Candidate> load_pool(const std::filesystem::path& path);
void save_pool(std::span<const Candidate> candidates,
               const std::filesystem::path& path);

// Throws ValidationError.
void validate_task(const TaskInstance& task);
void validate_corpus(std::span<const TaskInstance> tasks);
void validate_pool(std::span<const Candidate> candidates);

nlohmann::json to_json(const TaskInstance& task);
nlohmann::json to_json(const Candidate& candidate);
nlohmann::json to_json(const ScoreBundle& scores);
nlohmann::json to_json(const ExecutionOutcome& outcome);
TaskInstance task_from_json(const nlohmann::json& j);
Candidate candidate_from_json(const nlohmann::json& j);
ScoreBundle scores_from_json(const nlohmann::json& j);
ExecutionOutcome outcome_from_json(const nlohmann::json& j);

/// Writes `contents` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view contents);

}  // namespace crr
