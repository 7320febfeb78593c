#include "fvkit/report.hpp"

#include <charconv>
#include <cstdio>
#include <memory>
#include <stdexcept>

#include <openssl/evp.h>

namespace fvkit {

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string git_blob_hash(const std::string& text) {
  const std::string header = "blob " + std::to_string(text.size());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), header.data(), header.size() + 1) != 1 ||
      EVP_DigestUpdate(ctx.get(), text.data(), text.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
    throw std::runtime_error("SHA-1 digest failed");
  std::string hex;
  char byte[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", digest[i]);
    hex += byte;
  }
  return hex;
}

void Table::seal() {
  meta("version", FVKIT_VERSION);
  std::string canonical;
  for (const auto& [k, v] : metadata) canonical += k + "=" + v + "\n";
  meta("config_hash", git_blob_hash(canonical));
}

void write_csv(const Table& table, std::ostream& os) {
  for (const auto& [k, v] : table.metadata) os << "# " << k << ": " << v << "\n";
  for (std::size_t i = 0; i < table.columns.size(); ++i) os << (i ? "," : "") << table.columns[i];
  os << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << "\n";
  }
  for (const auto& [k, v] : table.footer) os << "# " << k << ": " << v << "\n";
}

nlohmann::ordered_json table_to_json(const Table& table) {
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
  for (const auto& [k, v] : table.metadata) meta[k] = v;
  nlohmann::ordered_json foot = nlohmann::ordered_json::object();
  for (const auto& [k, v] : table.footer) foot[k] = v;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& row : table.rows) {
    nlohmann::ordered_json r = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < row.size() && i < table.columns.size(); ++i) r[table.columns[i]] = row[i];
    rows.push_back(std::move(r));
  }
  nlohmann::ordered_json out;
  out["metadata"] = meta;
  out["columns"] = table.columns;
  out["rows"] = rows;
  out["footer"] = foot;
  return out;
}

void write_json(const Table& table, std::ostream& os) { os << table_to_json(table).dump(2) << "\n"; }

}  // namespace fvkit
