#include "sdperl/code_metrics.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <unordered_set>
#include <vector>

#include "sdperl/errors.hpp"

namespace sdperl {

const std::array<std::string, 20>& MetricVector::names() {
    static const std::array<std::string, 20> n = {
        "loc",           "sloc",           "comment_count",     "comment_density",
        "blank_lines",   "total_tokens",   "unique_tokens",     "avg_line_length",
        "code_chars",    "function_count", "variable_count",    "loop_count",
        "conditional_count", "try_catch_count", "import_count", "class_count",
        "interface_count",   "annotation_count", "method_invocation_count", "literal_count"};
    return n;
}

std::array<double, 20> MetricVector::values() const {
    return {loc,
            sloc,
            comment_count,
            comment_density,
            blank_lines,
            total_tokens,
            unique_tokens,
            avg_line_length,
            code_chars,
            function_count,
            variable_count,
            loop_count,
            conditional_count,
            try_catch_count,
            import_count,
            class_count,
            interface_count,
            annotation_count,
            method_invocation_count,
            literal_count};
}

namespace {

enum class CharClass : unsigned char { Code, Comment, StringContent };

struct ScanResult {
    std::vector<CharClass> cls;  // one per source char
    long comments = 0;
    long string_literals = 0;
    long char_literals = 0;
};

// Single pass classifying every character and counting comments/literals.
ScanResult scan(const std::string& src) {
    enum class State { Normal, LineComment, BlockComment, Str, Chr };
    ScanResult r;
    r.cls.assign(src.size(), CharClass::Code);
    State state = State::Normal;
    bool escaped = false;

    for (std::size_t i = 0; i < src.size(); ++i) {
        const char c = src[i];
        switch (state) {
            case State::Normal:
                if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
                    state = State::LineComment;
                    ++r.comments;
                    r.cls[i] = CharClass::Comment;
                } else if (c == '/' && i + 1 < src.size() && src[i + 1] == '*') {
                    state = State::BlockComment;
                    ++r.comments;
                    r.cls[i] = CharClass::Comment;
                    r.cls[i + 1] = CharClass::Comment;
                    ++i;
                } else if (c == '"') {
                    state = State::Str;
                    ++r.string_literals;
                    escaped = false;
                    r.cls[i] = CharClass::StringContent;
                } else if (c == '\'') {
                    state = State::Chr;
                    ++r.char_literals;
                    escaped = false;
                    r.cls[i] = CharClass::StringContent;
                }
                break;
            case State::LineComment:
                if (c == '\n') state = State::Normal;
                else r.cls[i] = CharClass::Comment;
                break;
            case State::BlockComment:
                r.cls[i] = CharClass::Comment;
                if (c == '*' && i + 1 < src.size() && src[i + 1] == '/') {
                    r.cls[i + 1] = CharClass::Comment;
                    ++i;
                    state = State::Normal;
                }
                break;
            case State::Str:
            case State::Chr:
                if (c == '\n') {  // unterminated literal ends at the line
                    state = State::Normal;
                    break;
                }
                r.cls[i] = CharClass::StringContent;
                if (escaped) escaped = false;
                else if (c == '\\') escaped = true;
                else if ((state == State::Str && c == '"') || (state == State::Chr && c == '\'')) {
                    state = State::Normal;
                }
                break;
        }
    }
    return r;
}

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)); }

struct TokenCounts {
    long total = 0;
    long numeric = 0;
    std::unordered_set<std::string> unique;
    std::map<std::string, long> keyword_hits;  // filled lazily by callers
};

// Tokenizer: identifier/number runs plus single-char punctuation; whitespace
// separates. Numeric tokens absorb hex, decimal point, exponent and a single
// letter suffix so `2.5f` is one token.
void tokenize(const std::string& text, TokenCounts& out,
              const std::set<std::string>* keywords = nullptr) {
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        const char c = text[i];
        if (is_space(c)) {
            ++i;
            continue;
        }
        std::size_t start = i;
        if (is_word_char(c)) {
            const bool numeric = std::isdigit(static_cast<unsigned char>(c));
            if (numeric) {
                if (c == '0' && i + 1 < n && (text[i + 1] == 'x' || text[i + 1] == 'X')) {
                    i += 2;
                    while (i < n && std::isxdigit(static_cast<unsigned char>(text[i]))) ++i;
                } else {
                    while (i < n && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
                    if (i + 1 < n && text[i] == '.' && std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
                        ++i;
                        while (i < n && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
                    }
                    if (i < n && (text[i] == 'e' || text[i] == 'E')) {
                        std::size_t j = i + 1;
                        if (j < n && (text[j] == '+' || text[j] == '-')) ++j;
                        if (j < n && std::isdigit(static_cast<unsigned char>(text[j]))) {
                            i = j;
                            while (i < n && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
                        }
                    }
                    if (i < n && (text[i] == 'f' || text[i] == 'F' || text[i] == 'd' ||
                                  text[i] == 'D' || text[i] == 'l' || text[i] == 'L')) {
                        ++i;
                    }
                }
                ++out.numeric;
            } else {
                while (i < n && is_word_char(text[i])) ++i;
            }
            std::string tok = text.substr(start, i - start);
            if (keywords && keywords->count(tok)) ++out.keyword_hits[tok];
            out.unique.insert(std::move(tok));
        } else {
            ++i;
            out.unique.insert(text.substr(start, 1));
        }
        ++out.total;
    }
}

long count_keyword_group(const TokenCounts& counts, std::initializer_list<const char*> kws) {
    long s = 0;
    for (const char* k : kws) {
        auto it = counts.keyword_hits.find(k);
        if (it != counts.keyword_hits.end()) s += it->second;
    }
    return s;
}

const std::set<std::string>& construct_keywords() {
    static const std::set<std::string> kw = {"for",   "while",   "do",    "if",     "else",
                                             "switch", "case",    "try",   "catch",  "finally",
                                             "import", "class",   "interface"};
    return kw;
}

long count_regex(const std::string& text, const std::regex& re) {
    return std::distance(std::sregex_iterator(text.begin(), text.end(), re), std::sregex_iterator());
}

}  // namespace

MetricVector extract_metrics(const std::string& source) {
    MetricVector m;
    if (source.empty()) return m;

    const ScanResult scanned = scan(source);

    // Line classification over the original text.
    long loc = 0, blank = 0, comment_only = 0, sloc = 0;
    long long char_sum = 0;
    {
        std::size_t line_start = 0;
        auto close_line = [&](std::size_t line_end) {  // [line_start, line_end)
            ++loc;
            char_sum += static_cast<long long>(line_end - line_start);
            bool any_visible = false, any_code = false;
            for (std::size_t i = line_start; i < line_end; ++i) {
                if (is_space(source[i])) continue;
                any_visible = true;
                if (scanned.cls[i] != CharClass::Comment) any_code = true;
            }
            if (!any_visible) ++blank;
            else if (any_code) ++sloc;
            else ++comment_only;
        };
        for (std::size_t i = 0; i < source.size(); ++i) {
            if (source[i] == '\n') {
                close_line(i);
                line_start = i + 1;
            }
        }
        if (line_start < source.size()) close_line(source.size());
    }

    // Comment-stripped text (for tokens) and comment+string-stripped text
    // (for construct counting). Newlines survive both.
    std::string no_comments = source;
    std::string no_comments_strings = source;
    for (std::size_t i = 0; i < source.size(); ++i) {
        if (source[i] == '\n') continue;
        if (scanned.cls[i] == CharClass::Comment) {
            no_comments[i] = ' ';
            no_comments_strings[i] = ' ';
        } else if (scanned.cls[i] == CharClass::StringContent) {
            no_comments_strings[i] = ' ';
        }
    }

    TokenCounts tokens;
    tokenize(no_comments, tokens);

    TokenCounts code_tokens;
    tokenize(no_comments_strings, code_tokens, &construct_keywords());

    static const std::regex annotation_re(R"(@[A-Za-z_$][A-Za-z0-9_$]*)");
    static const std::regex invocation_re(
        R"([A-Za-z_$][A-Za-z0-9_$]*\s*\.\s*[A-Za-z_$][A-Za-z0-9_$]*\s*\()");
    static const std::regex function_re(
        R"((?:^|[^A-Za-z0-9_$])(?:public|private|protected|static|final|abstract|synchronized|native|void|int|long|double|float|boolean|char|byte|short|String|var|function|def)\s+(?:[A-Za-z_$][A-Za-z0-9_$]*\s+)*([A-Za-z_$][A-Za-z0-9_$]*)\s*\()");
    static const std::regex variable_re(
        R"((?:^|[^A-Za-z0-9_$])(?:int|long|double|float|boolean|char|byte|short|String|var|let|const)\s+[A-Za-z_$][A-Za-z0-9_$]*(?![A-Za-z0-9_$])(?!\s*\())");
    static const std::unordered_set<std::string> not_function_names = {
        "if", "for", "while", "switch", "catch", "return", "new", "do", "else", "try"};

    long functions = 0;
    {
        std::istringstream lines(no_comments_strings);
        std::string line;
        while (std::getline(lines, line)) {
            auto it = std::sregex_iterator(line.begin(), line.end(), function_re);
            for (; it != std::sregex_iterator(); ++it) {
                if (!not_function_names.count((*it)[1].str())) {
                    ++functions;
                    break;  // at most one per line
                }
            }
        }
    }

    m.loc = static_cast<double>(loc);
    m.sloc = static_cast<double>(sloc);
    m.comment_count = static_cast<double>(scanned.comments);
    m.comment_density = loc > 0 ? static_cast<double>(scanned.comments) / static_cast<double>(loc) : 0.0;
    m.blank_lines = static_cast<double>(blank);
    m.total_tokens = static_cast<double>(tokens.total);
    m.unique_tokens = static_cast<double>(tokens.unique.size());
    m.avg_line_length = loc > 0 ? static_cast<double>(char_sum) / static_cast<double>(loc) : 0.0;
    m.code_chars = static_cast<double>(source.size());
    m.function_count = static_cast<double>(functions);
    m.variable_count = static_cast<double>(count_regex(no_comments_strings, variable_re));
    m.loop_count = static_cast<double>(count_keyword_group(code_tokens, {"for", "while", "do"}));
    m.conditional_count =
        static_cast<double>(count_keyword_group(code_tokens, {"if", "else", "switch", "case"}));
    m.try_catch_count =
        static_cast<double>(count_keyword_group(code_tokens, {"try", "catch", "finally"}));
    m.import_count = static_cast<double>(count_keyword_group(code_tokens, {"import"}));
    m.class_count = static_cast<double>(count_keyword_group(code_tokens, {"class"}));
    m.interface_count = static_cast<double>(count_keyword_group(code_tokens, {"interface"}));
    m.annotation_count = static_cast<double>(count_regex(no_comments_strings, annotation_re));
    m.method_invocation_count = static_cast<double>(count_regex(no_comments_strings, invocation_re));
    m.literal_count =
        static_cast<double>(scanned.string_literals + scanned.char_literals + code_tokens.numeric);
    return m;
}

FeatureMatrix extract_corpus(const std::filesystem::path& root, const std::filesystem::path& labels_csv,
                             const std::string& label_column) {
    std::ifstream in(labels_csv);
    if (!in) throw DataError("cannot open labels file: " + labels_csv.string());

    std::string header_line;
    if (!std::getline(in, header_line)) throw DataError("empty labels file: " + labels_csv.string());

    auto split = [](const std::string& line) {
        std::vector<std::string> out;
        std::string cur;
        for (char c : line) {
            if (c == ',') {
                out.push_back(cur);
                cur.clear();
            } else if (c != '\r') {
                cur.push_back(c);
            }
        }
        out.push_back(cur);
        return out;
    };

    const auto header = split(header_line);
    int path_idx = -1, label_idx = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "path") path_idx = static_cast<int>(i);
        if (header[i] == label_column) label_idx = static_cast<int>(i);
    }
    if (path_idx < 0 || label_idx < 0) {
        throw DataError("labels file needs 'path' and '" + label_column + "' columns");
    }

    std::map<std::string, int> labeled;  // sorted by path
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto fields = split(line);
        if (fields.size() != header.size()) {
            throw DataError("bad labels row: '" + line + "'");
        }
        const std::string& rel = fields[static_cast<std::size_t>(path_idx)];
        const std::string& lab = fields[static_cast<std::size_t>(label_idx)];
        if (lab != "0" && lab != "1") {
            throw DataError("label for '" + rel + "' must be 0 or 1, got '" + lab + "'");
        }
        if (!labeled.emplace(rel, lab == "1" ? 1 : 0).second) {
            throw DataError("duplicate path in labels: '" + rel + "'");
        }
    }

    FeatureMatrix out;
    out.feature_names.assign(MetricVector::names().begin(), MetricVector::names().end());
    for (const auto& [rel, label] : labeled) {
        const std::filesystem::path full = root / rel;
        std::ifstream src(full, std::ios::binary);
        if (!src) throw DataError("labeled file not found or unreadable: " + full.string());
        std::ostringstream buf;
        buf << src.rdbuf();
        const auto vals = extract_metrics(buf.str()).values();
        out.rows.emplace_back(vals.begin(), vals.end());
        out.labels.push_back(label);
        out.source_ids.push_back(rel);
    }
    if (out.rows.empty()) throw DataError("labels file lists no rows: " + labels_csv.string());
    return out;
}

}  // namespace sdperl
