// Output tables: CSV with '#'-prefixed metadata lines, mirrored as JSON.
#pragma once

#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace fvkit {

struct Table {
  std::vector<std::pair<std::string, std::string>> metadata;  ///< header lines, in order
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::pair<std::string, std::string>> footer;  ///< trailing '#' lines

  void meta(std::string key, std::string value) { metadata.emplace_back(std::move(key), std::move(value)); }
  void foot(std::string key, std::string value) { footer.emplace_back(std::move(key), std::move(value)); }
  /// Adds fvkit version and the git-style hash of the metadata block.
  void seal();
};

/// Shortest round-trip decimal form.
std::string format_double(double x);

/// SHA-1 of "blob <len>\0<text>", hex encoded.
std::string git_blob_hash(const std::string& text);

void write_csv(const Table& table, std::ostream& os);
/// Keys keep the CSV order.
nlohmann::ordered_json table_to_json(const Table& table);
void write_json(const Table& table, std::ostream& os);

}  // namespace fvkit
