#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace ropd::util {

using json = nlohmann::json;

/// Parses one JSON object per non-empty line. `on_record` receives the
/// 1-based line number; parse failures surface as MalformedRecord naming it.
void for_each_jsonl_record(
    const std::filesystem::path& path,
    const std::function<void(std::size_t line_no, const json& record)>& on_record);

std::vector<json> read_jsonl(const std::filesystem::path& path);

std::string to_jsonl(const std::vector<json>& records);

}  // namespace ropd::util
