#pragma once

#include <string>
#include <vector>

#include "hsprobe/labeling.hpp"
#include "hsprobe/tensor.hpp"

namespace hsprobe {

/// One processed sample: provenance text, the fixed-shape activation tensor
/// and every labeling signal.
struct SampleRecord {
    std::string sample_id;
    std::string context;
    std::string question;
    std::vector<std::string> gold_answers;
    std::string response;
    int token_count = 0;  // pre-truncation; equals hidden.token_count()
    HiddenStateTensor hidden;
    LabelBundle labels;
};

/// Metadata (everything except the tensor) as one JSON line and back.
std::string record_meta_to_json(const SampleRecord& r);
SampleRecord record_meta_from_json(const std::string& line);

std::string label_bundle_to_json(const LabelBundle& b);
LabelBundle label_bundle_from_json(const std::string& text);

}  // namespace hsprobe
