#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "nodulekit/geometry.hpp"

namespace nodulekit {

// One per-slice edge-map polygon in voxel coordinates.
struct Roi {
    int slice_index = 0;
    std::vector<std::pair<int, int>> vertices;  // (x, y)

    bool operator==(const Roi&) const = default;
};

// One reader's outline + malignancy rating for one nodule.
struct NoduleReading {
    std::string nodule_id;
    int malignancy = 0;  // 1..5
    std::vector<Roi> rois;

    bool operator==(const NoduleReading&) const = default;
};

struct ReadingSession {
    std::vector<NoduleReading> nodules;
    std::vector<IVec3> small_nodules;  // marked by position only, never cohorted
    std::vector<IVec3> non_nodules;

    bool operator==(const ReadingSession&) const = default;
};

// Per-reader annotations for one patient, in document order.
struct AnnotationSet {
    std::string patient_id;
    std::vector<ReadingSession> sessions;
    std::vector<std::string> warnings;  // non-fatal findings from parsing

    bool same_content(const AnnotationSet& other) const {
        return patient_id == other.patient_id && sessions == other.sessions;
    }
};

// Parses the annotation XML subset. Unknown elements and attributes are
// skipped so fuller documents stay readable. Throws XmlSyntaxError,
// RatingOutOfRange, or EmptyPolygon.
AnnotationSet parse_annotations(std::string_view xml_bytes);

// Inverse of parse_annotations for the retained fields; output is
// deterministic, and parse(serialize(s)) == s.
std::string serialize_annotations(const AnnotationSet& set);

// Returns a description of every vertex or locus outside `dims`; empty when
// all coordinates are in bounds.
std::vector<std::string> validate_bounds(const AnnotationSet& set, const Dims& dims);

}  // namespace nodulekit
