#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "effocr/geometry.hpp"
#include "effocr/recognition.hpp"

namespace effocr {

/// A line's box, its tokens, and the crop origin used when the line was cut
/// from the page (maps token coordinates back to page coordinates).
struct TranscribedLine {
    BBox bbox; // page coordinates
    std::vector<RecognizedToken> tokens;
    std::string text;
    int origin_x = 0;
    int origin_y = 0;
};

struct PageTranscription {
    std::vector<TranscribedLine> lines; // reading order
    std::string full_text;              // line texts joined by newline
    Orientation orientation = Orientation::Horizontal;
};

/// Reading-order permutation of line boxes. Horizontal: top-to-bottom by
/// y-center, where lines whose y-centers sit within 30% of the mean line
/// height of the row anchor count as the same visual row and run
/// left-to-right. Vertical: right-to-left columns by x-center, ties
/// top-to-bottom.
inline std::vector<size_t> order_lines(const std::vector<BBox>& lines, Orientation orientation) {
    std::vector<size_t> order(lines.size());
    std::iota(order.begin(), order.end(), 0);
    if (lines.empty()) return order;

    if (orientation == Orientation::Vertical) {
        std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            if (lines[a].center_x() != lines[b].center_x())
                return lines[a].center_x() > lines[b].center_x();
            if (lines[a].y0 != lines[b].y0) return lines[a].y0 < lines[b].y0;
            return a < b;
        });
        return order;
    }

    // Deterministic pre-sort so row grouping does not depend on input order.
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (lines[a].center_y() != lines[b].center_y())
            return lines[a].center_y() < lines[b].center_y();
        if (lines[a].x0 != lines[b].x0) return lines[a].x0 < lines[b].x0;
        return a < b;
    });
    float mean_height = 0.0f;
    for (const auto& b : lines) mean_height += b.height();
    mean_height /= static_cast<float>(lines.size());
    const float band = 0.3f * mean_height;

    std::vector<std::vector<size_t>> rows;
    for (size_t idx : order) {
        if (!rows.empty()) {
            const size_t anchor = rows.back().front();
            if (std::abs(lines[idx].center_y() - lines[anchor].center_y()) <= band) {
                rows.back().push_back(idx);
                continue;
            }
        }
        rows.push_back({idx});
    }
    std::vector<size_t> out;
    out.reserve(lines.size());
    for (auto& row : rows) {
        std::sort(row.begin(), row.end(), [&](size_t a, size_t b) {
            if (lines[a].x0 != lines[b].x0) return lines[a].x0 < lines[b].x0;
            if (lines[a].center_y() != lines[b].center_y())
                return lines[a].center_y() < lines[b].center_y();
            return a < b;
        });
        out.insert(out.end(), row.begin(), row.end());
    }
    return out;
}

/// Token texts joined by a single space or nothing; no leading/trailing
/// separator.
inline std::string compose_line(const std::vector<RecognizedToken>& tokens, bool insert_spaces) {
    std::string out;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i && insert_spaces) out += ' ';
        out += tokens[i].text;
    }
    return out;
}

/// Orders lines and tokens, composes line texts, and joins them into the
/// page text. Invariant to any shuffle of the input lines or tokens.
inline PageTranscription assemble(std::vector<TranscribedLine> lines, Orientation orientation,
                                  bool insert_spaces) {
    PageTranscription page;
    page.orientation = orientation;

    std::vector<BBox> boxes;
    boxes.reserve(lines.size());
    for (const auto& l : lines) boxes.push_back(l.bbox);
    const std::vector<size_t> order = order_lines(boxes, orientation);

    page.lines.reserve(lines.size());
    for (size_t i = 0; i < order.size(); ++i) {
        TranscribedLine line = std::move(lines[order[i]]);
        std::sort(line.tokens.begin(), line.tokens.end(),
                  [orientation](const RecognizedToken& a, const RecognizedToken& b) {
                      return detail::reading_before(a.bbox, b.bbox, orientation);
                  });
        line.text = compose_line(line.tokens, insert_spaces);
        if (i) page.full_text += '\n';
        page.full_text += line.text;
        page.lines.push_back(std::move(line));
    }
    return page;
}

} // namespace effocr
