#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "afif4/error.hpp"
#include "afif4/landmarks.hpp"

namespace afif4 {

inline constexpr int kMale = +1;
inline constexpr int kFemale = -1;

struct SampleRecord {
    std::string image_path;
    int gender = kMale;  // +1 male, -1 female
    std::string subject_id;
    int fold = -1;  // -1 = unassigned
    std::optional<LandmarkSet> landmarks;
};

struct DatasetManifest {
    std::string name;
    std::vector<SampleRecord> records;
};

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == '\t') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_double(const std::string& s, int line_no, const char* what) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error("manifest line " + std::to_string(line_no) + ": bad " + std::string(what) +
                    " '" + s + "'");
    }
}

}  // namespace detail

// Line-record manifest format: tab-separated fields per line
//   image-path  gender(M|F)  subject-id  fold(int or "-")  [34 landmark numbers]
// '#' starts a comment line; blank lines are ignored.
inline DatasetManifest parse_manifest_stream(std::istream& in, const std::string& name) {
    DatasetManifest mf;
    mf.name = name;
    std::set<std::string> seen_paths;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;

        const auto fields = detail::split_tabs(line);
        if (fields.size() != 4 && fields.size() != 4 + 2 * kLandmarkCount)
            throw Error("manifest line " + std::to_string(line_no) + ": expected 4 or " +
                        std::to_string(4 + 2 * kLandmarkCount) + " fields, got " +
                        std::to_string(fields.size()));

        SampleRecord rec;
        rec.image_path = fields[0];
        if (rec.image_path.empty())
            throw Error("manifest line " + std::to_string(line_no) + ": empty image path");
        if (!seen_paths.insert(rec.image_path).second)
            throw Error("manifest line " + std::to_string(line_no) + ": duplicate image path '" +
                        rec.image_path + "'");

        if (fields[1] == "M") rec.gender = kMale;
        else if (fields[1] == "F") rec.gender = kFemale;
        else
            throw Error("manifest line " + std::to_string(line_no) + ": invalid gender token '" +
                        fields[1] + "' (M or F)");

        rec.subject_id = fields[2];

        if (fields[3] == "-") {
            rec.fold = -1;
        } else {
            const double f = detail::parse_double(fields[3], line_no, "fold id");
            rec.fold = static_cast<int>(f);
            if (rec.fold < 0 || static_cast<double>(rec.fold) != f)
                throw Error("manifest line " + std::to_string(line_no) + ": fold id must be a non-negative integer or '-'");
        }

        if (fields.size() > 4) {
            LandmarkSet lm;
            for (int i = 0; i < kLandmarkCount; ++i) {
                lm.points[i].x = detail::parse_double(fields[4 + 2 * i], line_no, "landmark x");
                lm.points[i].y = detail::parse_double(fields[5 + 2 * i], line_no, "landmark y");
            }
            rec.landmarks = lm;
        }
        mf.records.push_back(std::move(rec));
    }
    return mf;
}

inline DatasetManifest parse_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open manifest: " + path);
    const std::size_t slash = path.find_last_of("/\\");
    const std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    const std::size_t dot = base.find_last_of('.');
    try {
        return parse_manifest_stream(in, dot == std::string::npos ? base : base.substr(0, dot));
    } catch (const Error& e) {
        throw Error(path + ": " + e.what());
    }
}

inline void write_manifest(const DatasetManifest& mf, std::ostream& out) {
    for (const SampleRecord& r : mf.records) {
        out << r.image_path << '\t' << (r.gender == kMale ? 'M' : 'F') << '\t' << r.subject_id
            << '\t';
        if (r.fold < 0) out << '-';
        else out << r.fold;
        if (r.landmarks) {
            out.precision(17);
            for (const Point& p : r.landmarks->points) out << '\t' << p.x << '\t' << p.y;
        }
        out << '\n';
    }
}

inline void write_manifest(const DatasetManifest& mf, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write manifest: " + path);
    write_manifest(mf, out);
    if (!out) throw Error("short write: " + path);
}

}  // namespace afif4
