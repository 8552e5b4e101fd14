#include "asd/data/manifest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "asd/error.hpp"

namespace asd::data {
namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(std::string_view line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

}  // namespace

std::string_view to_string(Split s) { return s == Split::kTrain ? "train" : "test"; }
std::string_view to_string(Condition c) { return c == Condition::kNormal ? "normal" : "anomaly"; }

std::string to_string(const MachineKey& key) { return key.type + "/id_" + std::to_string(key.id); }

ClassMap::ClassMap(std::vector<MachineKey> keys) : keys_(std::move(keys)) {
    std::sort(keys_.begin(), keys_.end());
    keys_.erase(std::unique(keys_.begin(), keys_.end()), keys_.end());
}

bool ClassMap::contains(const MachineKey& key) const { return std::binary_search(keys_.begin(), keys_.end(), key); }

std::size_t ClassMap::index_of(const MachineKey& key) const {
    const auto it = std::lower_bound(keys_.begin(), keys_.end(), key);
    if (it == keys_.end() || *it != key) {
        throw ClassMapError("machine " + to_string(key) + " is not in the class map (" + std::to_string(keys_.size()) +
                            " known classes)");
    }
    return static_cast<std::size_t>(it - keys_.begin());
}

void to_json(nlohmann::json& j, const ClassMap& m) {
    j = nlohmann::json::array();
    for (const auto& k : m.keys()) j.push_back({{"machine_type", k.type}, {"machine_id", k.id}});
}

void from_json(const nlohmann::json& j, ClassMap& m) {
    std::vector<MachineKey> keys;
    for (const auto& e : j) keys.push_back({e.at("machine_type").get<std::string>(), e.at("machine_id").get<int>()});
    const auto count = keys.size();
    m = ClassMap(std::move(keys));
    if (m.size() != count) throw Error("class map contains duplicate entries");
}

std::filesystem::path Manifest::resolve(const ClipRecord& r) const {
    if (r.path.is_absolute() || base_dir.empty()) return r.path;
    return base_dir / r.path;
}

std::vector<std::size_t> Manifest::indices(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].split == split) out.push_back(i);
    }
    return out;
}

Manifest parse_manifest_text(std::string_view text, std::filesystem::path base_dir) {
    Manifest m;
    m.base_dir = std::move(base_dir);
    std::set<std::string> seen_paths;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto nl = text.find('\n', start);
        const auto raw = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        const std::string line = trim(raw);
        if (line.empty()) continue;
        if (!header_seen) {
            if (line != kManifestHeader) {
                throw ManifestError("expected header '" + std::string(kManifestHeader) + "', got '" + line + "'", line_no);
            }
            header_seen = true;
            continue;
        }
        const auto f = split_fields(line);
        if (f.size() != 5) throw ManifestError("expected 5 fields, got " + std::to_string(f.size()), line_no);
        ClipRecord r;
        r.line = line_no;
        if (f[0].empty()) throw ManifestError("empty path", line_no);
        r.path = f[0];
        if (f[1].empty()) throw ManifestError("empty machine_type", line_no);
        r.machine.type = f[1];
        const auto [ptr, ec] = std::from_chars(f[2].data(), f[2].data() + f[2].size(), r.machine.id);
        if (ec != std::errc() || ptr != f[2].data() + f[2].size() || r.machine.id < 0) {
            throw ManifestError("machine_id '" + f[2] + "' is not a non-negative integer", line_no);
        }
        if (f[3] == "train") {
            r.split = Split::kTrain;
        } else if (f[3] == "test") {
            r.split = Split::kTest;
        } else {
            throw ManifestError("unknown split '" + f[3] + "'", line_no);
        }
        if (f[4] == "normal") {
            r.condition = Condition::kNormal;
        } else if (f[4] == "anomaly") {
            r.condition = Condition::kAnomaly;
        } else {
            throw ManifestError("unknown condition '" + f[4] + "'", line_no);
        }
        if (r.split == Split::kTrain && r.condition == Condition::kAnomaly) {
            throw ManifestError("anomaly clip in train split (training data must be normal only)", line_no);
        }
        if (!seen_paths.insert(f[0]).second) throw ManifestError("duplicate row for path '" + f[0] + "'", line_no);
        m.records.push_back(std::move(r));
    }
    if (!header_seen || m.records.empty()) throw ManifestError("no records", 0);

    std::vector<MachineKey> keys;
    for (const auto& r : m.records) keys.push_back(r.machine);
    m.class_map = ClassMap(std::move(keys));
    if (m.class_map.size() < 2) {
        throw ManifestError("manifest defines " + std::to_string(m.class_map.size()) + " class; at least 2 are required", 0);
    }
    return m;
}

Manifest parse_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ManifestError("cannot open manifest " + path.string(), 0);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_manifest_text(ss.str(), path.parent_path());
}

void write_manifest(const std::filesystem::path& path, const std::vector<ClipRecord>& records) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write manifest " + path.string());
    out << kManifestHeader << "\n";
    for (const auto& r : records) {
        out << r.path.generic_string() << "," << r.machine.type << "," << r.machine.id << "," << to_string(r.split) << ","
            << to_string(r.condition) << "\n";
    }
}

}  // namespace asd::data
