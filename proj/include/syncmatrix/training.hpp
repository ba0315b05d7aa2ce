#pragma once

#include <vector>

#include "syncmatrix/encoders.hpp"
#include "syncmatrix/estimators.hpp"
#include "syncmatrix/losses.hpp"
#include "syncmatrix/synthdata.hpp"

namespace syncmatrix {

/// Which cross-modal objective drives embedding training. The angular
/// multi-way loss is the default; the others are kept selectable for
/// ablation.
enum class EmbedObjective { contrastive, multiway, angular };

EmbedObjective embed_objective_from_string(const std::string& name);

struct EmbedTrainResult {
    std::vector<TrainCurvePoint> curve;  // val_metric is -validation_loss
    AngularScale scale;                  // only meaningful for the angular objective
};

/// Trains both encoders so matched audio/visual content lands close in the
/// joint space. Pairs are aligned using each clip's ground-truth offset; the
/// remaining features of the clip act as the in-batch negatives of the
/// multi-way losses. Mutates enc in place.
EmbedTrainResult train_embedding(const std::vector<SyntheticClip>& clips, EncoderPair& enc,
                                 EmbedObjective objective, const TrainHyper& hyper,
                                 double margin = 1.0);

}  // namespace syncmatrix
