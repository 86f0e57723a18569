"""
From reactions to engagement: rating, familiarity, recommendation
=================================================================

Per-song reaction timelines feed three small applications: predicting
the listener's star rating, telling known songs from unknown ones, and
recommending songs whose reaction pattern matches a song the listener
enjoyed.
"""

import numpy as np

from musereact.core import ReactionEvent, ReactionLabel
from musereact.harness import loso_folds, make_engagement_dataset
from musereact import engage

S = ReactionLabel.SINGING_HUMMING
H = ReactionLabel.HEAD_MOTION

# A synthetic listening study: 8 subjects, 6 sessions each, with star
# ratings and known/unknown tags correlated with how much they reacted.
ds = make_engagement_dataset(8, 6, seed=0)
print(f"dataset: {ds.features.shape[0]} sessions, "
      f"{ds.features.shape[1]} features per session")

# Leave-one-subject-out: train the decision trees on seven subjects,
# test on the eighth, and rotate.
mae_folds, hits, total = [], 0, 0
for subject, train_idx, test_idx in loso_folds(ds.subjects):
    rating_tree = engage.train_rating_tree(ds.features[train_idx],
                                           ds.ratings[train_idx])
    preds = [engage.predict_rating(rating_tree, ds.features[i])
             for i in test_idx]
    mae_folds.append(np.mean(np.abs(np.asarray(preds) - ds.ratings[test_idx])))

    fam_tree = engage.train_familiarity_tree(
        ds.features[train_idx], [ds.familiarity[i] for i in train_idx])
    for i in test_idx:
        hits += engage.predict_familiarity(fam_tree, ds.features[i]) == ds.familiarity[i]
        total += 1

print(f"rating LOSO MAE: {np.mean(mae_folds):.3f} stars")
print(f"familiarity LOSO accuracy: {hits / total:.3f}")

# Recommendation compares per-second reaction-index patterns with an
# edit distance.  The pattern comes straight from detected events.
events = [ReactionEvent(label=S, t_start=3.0, t_end=9.0),
          ReactionEvent(label=H, t_start=12.0, t_end=18.0)]
query = engage.pattern_from_events(events, duration_s=20.0)
print(f"\nquery pattern: {query}")

pool = {
    "twin":     query.copy(),
    "shifted":  np.roll(query, 2),
    "contrary": np.full_like(query, 3),
}
print("recommendations (best first):")
for song_id, distance in engage.recommend(query, pool, top_n=3):
    print(f"  {song_id:9s} distance {distance:.0f}")
