#include "ropd/util/jsonl.hpp"

#include <fstream>

#include "ropd/error.hpp"

namespace ropd::util {

void for_each_jsonl_record(
    const std::filesystem::path& path,
    const std::function<void(std::size_t, const json&)>& on_record) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::IoError, "cannot open " + path.string());
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (record.is_discarded() || !record.is_object()) {
      throw Error(ErrorKind::MalformedRecord,
                  path.string() + ":" + std::to_string(line_no) +
                      ": not a JSON object");
    }
    on_record(line_no, record);
  }
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::vector<json> records;
  for_each_jsonl_record(path,
                        [&](std::size_t, const json& r) { records.push_back(r); });
  return records;
}

std::string to_jsonl(const std::vector<json>& records) {
  std::string out;
  for (const json& r : records) {
    out += r.dump();
    out.push_back('\n');
  }
  return out;
}

}  // namespace ropd::util
