#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "almatch/dataio.hpp"

namespace almatch {

namespace fs = std::filesystem;

std::string_view to_string(DataErrorKind kind) {
    switch (kind) {
        case DataErrorKind::missing_file: return "missing_file";
        case DataErrorKind::unresolvable_id: return "unresolvable_id";
        case DataErrorKind::malformed_row: return "malformed_row";
        case DataErrorKind::duplicate_id: return "duplicate_id";
        case DataErrorKind::header_mismatch: return "header_mismatch";
        case DataErrorKind::overlapping_splits: return "overlapping_splits";
    }
    return "unknown";
}

DataError::DataError(DataErrorKind kind, std::string file, std::size_t line, const std::string& message)
    : std::runtime_error(file + (line ? ":" + std::to_string(line) : std::string()) + ": " + message),
      kind_(kind),
      file_(std::move(file)),
      line_(line) {}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

CsvTable read_table(const fs::path& path) {
    if (!fs::is_regular_file(path)) {
        throw DataError(DataErrorKind::missing_file, path.string(), 0, "file not found");
    }
    try {
        return parse_csv(read_file(path));
    } catch (const CsvError& e) {
        throw DataError(DataErrorKind::malformed_row, path.string(), e.line(), e.what());
    }
}

using IdIndex = std::unordered_map<std::string, std::size_t>;

std::vector<Record> load_records(const fs::path& path, std::vector<std::string>& attributes, IdIndex& index) {
    const auto table = read_table(path);
    const std::string file = path.string();
    if (table.header.empty() || table.header.front() != "id") {
        throw DataError(DataErrorKind::header_mismatch, file, 1, "first column must be 'id'");
    }
    attributes.assign(table.header.begin() + 1, table.header.end());
    std::vector<Record> records;
    records.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        const auto& id = row.fields.front();
        if (!id || id->empty()) throw DataError(DataErrorKind::malformed_row, file, row.line, "record has no id");
        if (!index.emplace(*id, records.size()).second) {
            throw DataError(DataErrorKind::duplicate_id, file, row.line, "duplicate record id '" + *id + "'");
        }
        Record r;
        r.id = *id;
        for (std::size_t c = 1; c < row.fields.size(); ++c) r.attributes.push_back({table.header[c], row.fields[c]});
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<CandidatePair> load_split(const fs::path& path, const std::vector<Record>& a, const IdIndex& ia,
                                      const std::vector<Record>& b, const IdIndex& ib) {
    const auto table = read_table(path);
    const std::string file = path.string();
    const auto lcol = table.column("ltable_id");
    const auto rcol = table.column("rtable_id");
    const auto ycol = table.column("label");
    if (!lcol || !rcol || !ycol) {
        throw DataError(DataErrorKind::header_mismatch, file, 1, "split needs ltable_id, rtable_id and label columns");
    }
    std::vector<CandidatePair> pairs;
    pairs.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        const auto& l = row.fields[*lcol];
        const auto& r = row.fields[*rcol];
        const auto& y = row.fields[*ycol];
        if (!l || !r) throw DataError(DataErrorKind::malformed_row, file, row.line, "pair is missing a record id");
        const auto li = ia.find(*l);
        if (li == ia.end()) {
            throw DataError(DataErrorKind::unresolvable_id, file, row.line,
                            "ltable_id '" + *l + "' does not match any record in tableA");
        }
        const auto ri = ib.find(*r);
        if (ri == ib.end()) {
            throw DataError(DataErrorKind::unresolvable_id, file, row.line,
                            "rtable_id '" + *r + "' does not match any record in tableB");
        }
        if (!y || (*y != "0" && *y != "1")) {
            throw DataError(DataErrorKind::malformed_row, file, row.line, "label must be 0 or 1");
        }
        CandidatePair p;
        p.id = pairs.size();
        p.left = &a[li->second];
        p.right = &b[ri->second];
        p.truth = *y == "1" ? Label::match : Label::mismatch;
        pairs.push_back(p);
    }
    return pairs;
}

}  // namespace

std::shared_ptr<const DatasetBundle> load_dataset(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw DataError(DataErrorKind::missing_file, dir.string(), 0, "not a directory");
    auto data = std::make_shared<DatasetBundle>();
    data->name = fs::path(dir).lexically_normal().filename().string();
    if (data->name.empty()) data->name = fs::path(dir).lexically_normal().parent_path().filename().string();

    IdIndex ia, ib;
    std::vector<std::string> attrs_b;
    data->table_a = load_records(dir / "tableA.csv", data->attributes, ia);
    data->table_b = load_records(dir / "tableB.csv", attrs_b, ib);
    if (attrs_b != data->attributes) {
        throw DataError(DataErrorKind::header_mismatch, (dir / "tableB.csv").string(), 1,
                        "attribute columns differ from tableA.csv");
    }
    data->train = load_split(dir / "train.csv", data->table_a, ia, data->table_b, ib);
    data->valid = load_split(dir / "valid.csv", data->table_a, ia, data->table_b, ib);
    data->test = load_split(dir / "test.csv", data->table_a, ia, data->table_b, ib);

    // Splits must not share a record pair.
    std::map<std::pair<const Record*, const Record*>, std::string> owner;
    const std::pair<const char*, const std::vector<CandidatePair>*> splits[] = {
        {"train.csv", &data->train}, {"valid.csv", &data->valid}, {"test.csv", &data->test}};
    for (const auto& [file, pairs] : splits) {
        for (const auto& p : *pairs) {
            auto [it, inserted] = owner.emplace(std::pair{p.left, p.right}, file);
            if (!inserted && it->second != file) {
                throw DataError(DataErrorKind::overlapping_splits, (dir / file).string(), 0,
                                "pair (" + p.left->id + ", " + p.right->id + ") also appears in " + it->second);
            }
        }
    }
    return data;
}

void save_dataset(const DatasetBundle& data, const fs::path& dir) {
    fs::create_directories(dir);
    auto table = [&](const std::vector<Record>& records) {
        std::string out = "id";
        for (const auto& a : data.attributes) out += "," + csv_escape(a);
        out += "\n";
        for (const auto& r : records) {
            out += csv_escape(r.id);
            for (const auto& a : data.attributes) {
                const auto* v = r.find(a);
                out += "," + (v ? csv_escape_field(*v) : std::string());
            }
            out += "\n";
        }
        return out;
    };
    auto split = [](const std::vector<CandidatePair>& pairs) {
        std::string out = "ltable_id,rtable_id,label\n";
        for (const auto& p : pairs) {
            out += csv_escape(p.left->id) + "," + csv_escape(p.right->id) + "," +
                   (p.truth && *p.truth == Label::match ? "1" : "0") + "\n";
        }
        return out;
    };
    write_file_atomic(dir / "tableA.csv", table(data.table_a));
    write_file_atomic(dir / "tableB.csv", table(data.table_b));
    write_file_atomic(dir / "train.csv", split(data.train));
    write_file_atomic(dir / "valid.csv", split(data.valid));
    write_file_atomic(dir / "test.csv", split(data.test));
}

}  // namespace almatch
