#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dln {

// Flat key=value text files: one pair per line, # starts a comment, blank
// lines ignored, whitespace around key and value trimmed. Used for dataset
// meta, checkpoint meta, run meta and scan config files.
std::map<std::string, std::string> read_kv_file(const std::string& path);

// Comma-separated list helpers for kv values ("8,16,32").
std::vector<int> parse_int_list(const std::string& s);
std::vector<long> parse_long_list(const std::string& s);
std::vector<double> parse_double_list(const std::string& s);

long parse_long(const std::string& s);
std::uint64_t parse_u64(const std::string& s);
bool parse_bool(const std::string& s);  // accepts 0/1/true/false

}  // namespace dln
