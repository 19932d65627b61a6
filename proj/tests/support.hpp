#pragma once

#include "specfsm/extract.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace support {

inline std::filesystem::path fixtures() { return SPECFSM_FIXTURES; }

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& bytes) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << bytes;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("specfsm_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline specfsm::CandidateTransition cand(std::string provider, std::string from, std::string to,
                                         std::string condition, std::string action, int window = 0) {
    specfsm::CandidateTransition c;
    c.from_raw = from;
    c.to_raw = to;
    c.from = std::move(from);
    c.to = std::move(to);
    c.condition = std::move(condition);
    c.action = std::move(action);
    c.window_id = window;
    c.provider = std::move(provider);
    c.from_in_catalog = c.to_in_catalog = true;
    return c;
}

inline specfsm::CandidateSet set_of(const std::string& provider, std::vector<specfsm::CandidateTransition> ts) {
    specfsm::CandidateSet s;
    s.provider = provider;
    s.protocol = "TOY";
    s.spec_version = "1";
    for (auto& t : ts) t.provider = provider;
    s.transitions = std::move(ts);
    return s;
}

inline std::string random_words(std::mt19937_64& rng, std::size_t n, const std::vector<std::string>& vocab) {
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out += ' ';
        out += vocab[pick(rng)];
    }
    return out;
}

}  // namespace support
