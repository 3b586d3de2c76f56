#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "sdperl/dataset.hpp"

namespace sdperl {

// The 20 static source metrics, in fixed column order.
struct MetricVector {
    double loc = 0;
    double sloc = 0;
    double comment_count = 0;
    double comment_density = 0;
    double blank_lines = 0;
    double total_tokens = 0;
    double unique_tokens = 0;
    double avg_line_length = 0;
    double code_chars = 0;
    double function_count = 0;
    double variable_count = 0;
    double loop_count = 0;
    double conditional_count = 0;
    double try_catch_count = 0;
    double import_count = 0;
    double class_count = 0;
    double interface_count = 0;
    double annotation_count = 0;
    double method_invocation_count = 0;
    double literal_count = 0;

    static const std::array<std::string, 20>& names();
    std::array<double, 20> values() const;
};

// Heuristic metric extraction for Java-like C-family source.
//
// Fixed rules:
//  - Comments are // to end of line and /* ... */ (multi-line); comment
//    markers inside string or char literals do not open comments.
//  - Lines split on '\n'; a trailing newline does not create a last line.
//    A line is blank iff it holds only whitespace; a comment-only line has
//    comment text and whitespace exclusively; every other line is SLOC.
//  - Tokens are maximal [A-Za-z0-9_$] runs (with numeric tokens extended
//    over 0x hex, decimal point, exponent and one-letter suffix) plus
//    single-character punctuation, taken over the comment-stripped text.
//  - Construct counts (functions, variables, loops, conditionals, try/catch,
//    imports, classes, interfaces, annotations, invocations) are taken over
//    text with comments and string/char literal contents stripped.
//  - Literals = string literals + char literals + numeric tokens outside
//    strings.
//  - comment_density = comment_count / loc (0 when loc = 0); code_chars is
//    the raw character count; avg_line_length excludes the newline chars.
MetricVector extract_metrics(const std::string& source);

// One row per labeled file. The labels CSV maps a relative path to 0/1
// (columns `path`, label). Rows are ordered by path lexicographically.
FeatureMatrix extract_corpus(const std::filesystem::path& root, const std::filesystem::path& labels_csv,
                             const std::string& label_column = "Bug");

}  // namespace sdperl
