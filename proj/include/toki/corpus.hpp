#pragma once

#include <cstddef>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "toki/error.hpp"

namespace toki {

using ClassId = std::size_t;

// Lowercases ASCII and splits on runs of non-alphanumeric ASCII bytes.
// Bytes >= 0x80 count as word characters so UTF-8 letters stay inside words.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char ch : text) {
        const bool word_char = (ch >= '0' && ch <= '9') || (ch >= 'a' && ch <= 'z') ||
                               (ch >= 'A' && ch <= 'Z') || ch >= 0x80;
        if (word_char) {
            current.push_back(ch >= 'A' && ch <= 'Z' ? static_cast<char>(ch - 'A' + 'a')
                                                     : static_cast<char>(ch));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

inline std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

struct Document {
    std::string id;
    std::string raw_text;
    std::vector<std::string> tokens;

    static Document from_text(std::string id, std::string text) {
        Document doc{std::move(id), std::move(text), {}};
        doc.tokens = tokenize(doc.raw_text);
        return doc;
    }

    // Distinct tokens in order of first occurrence.
    std::vector<std::string> distinct_tokens() const {
        std::vector<std::string> out;
        std::unordered_map<std::string, bool> seen;
        for (const auto& t : tokens) {
            if (seen.emplace(t, true).second) out.push_back(t);
        }
        return out;
    }

    bool operator==(const Document&) const = default;
};

struct LabeledDataset {
    std::vector<Document> documents;
    std::vector<ClassId> labels;
    std::vector<std::string> class_names;

    std::size_t size() const { return documents.size(); }

    ClassId class_index(const std::string& name) const {
        for (std::size_t c = 0; c < class_names.size(); ++c) {
            if (class_names[c] == name) return c;
        }
        throw Error("unknown class label '" + name + "'");
    }

    void add(Document doc, ClassId label) {
        if (label >= class_names.size()) throw Error("label index out of range");
        documents.push_back(std::move(doc));
        labels.push_back(label);
    }

    bool operator==(const LabeledDataset&) const = default;
};

// JSONL: a header line {"classes": [...]}, then one {"id","text","label"} object per line.
inline LabeledDataset read_dataset(std::istream& in, const std::string& source = "<stream>") {
    using nlohmann::json;
    LabeledDataset ds;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(source, lineno, std::string("malformed JSON: ") + e.what());
        }
        if (!obj.is_object()) throw ParseError(source, lineno, "expected a JSON object");
        if (!have_header) {
            if (!obj.contains("classes") || !obj["classes"].is_array() || obj["classes"].empty()) {
                throw ParseError(source, lineno, "first line must declare a non-empty \"classes\" array");
            }
            for (const auto& c : obj["classes"]) {
                if (!c.is_string()) throw ParseError(source, lineno, "class names must be strings");
                ds.class_names.push_back(c.get<std::string>());
            }
            have_header = true;
            continue;
        }
        for (const char* field : {"id", "text", "label"}) {
            if (!obj.contains(field) || !obj[field].is_string()) {
                throw ParseError(source, lineno, std::string("missing string field \"") + field + "\"");
            }
        }
        const auto label = obj["label"].get<std::string>();
        ClassId cls = 0;
        try {
            cls = ds.class_index(label);
        } catch (const Error&) {
            throw ParseError(source, lineno, "unknown class label '" + label + "'");
        }
        ds.add(Document::from_text(obj["id"].get<std::string>(), obj["text"].get<std::string>()), cls);
    }
    if (!have_header) throw ParseError(source, 0, "empty dataset file");
    return ds;
}

inline LabeledDataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open dataset: " + path);
    return read_dataset(in, path);
}

inline void write_dataset(std::ostream& out, const LabeledDataset& ds) {
    using nlohmann::json;
    out << json{{"classes", ds.class_names}}.dump() << '\n';
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const json row{{"id", ds.documents[i].id},
                       {"text", ds.documents[i].raw_text},
                       {"label", ds.class_names.at(ds.labels[i])}};
        out << row.dump() << '\n';
    }
}

inline void save_dataset(const std::string& path, const LabeledDataset& ds) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write dataset: " + path);
    write_dataset(out, ds);
}

}  // namespace toki
