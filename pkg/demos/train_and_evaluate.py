"""
Train the filter and score it
=============================

A miniature version of the full pipeline: generate a few synthetic
sessions, train the filter's four neural models for a couple of epochs,
run the filter over a held-out session, and report wrist error.  Small
on purpose; expect it to finish in well under a minute.  The CLI runs
the same steps at full scale:

    iroco gen   --out runs/data --sessions 4 --duration 60
    iroco train --data runs/data --out runs/train --preset smoke
    iroco filter --checkpoint runs/train/checkpoint.json --data runs/data/session_03.jsonl
    iroco eval  --pred runs/filter/filtered.jsonl --data runs/data/session_03.jsonl
"""

import numpy as np

from iroco.denkf.filtering import filter_session
from iroco.denkf.training import TrainConfig, train
from iroco.metrics import pose_errors, session_report
from iroco.rotations import BodyModel
from iroco.synthgen import MotionConfig, NoiseConfig, gen_session

rng = np.random.default_rng
motion = MotionConfig(duration=8.0, rate=50.0)
noise = NoiseConfig()

# Three sessions to train on, one held out for scoring.
sessions = [gen_session(motion, noise, rng((0, i))) for i in range(4)]
train_set, holdout = sessions[:3], sessions[3]
print(f"{len(train_set)} training sessions, {len(train_set[0])} frames each")

# The smoke preset shrinks the networks and the epoch count so the loop
# stays fast; pass TrainConfig() instead for a full-size run.
cfg = TrainConfig.smoke(epochs=3, seed=0)
models, stats = train(train_set, cfg)
for s in stats:
    print(f"epoch {s.epoch}: end-to-end {s.end_to_end:.4f}  "
          f"transition {s.transition_loss:.4f}  sensor {s.sensor_loss:.4f}")

# Filter the held-out session and compare against ground truth.
obs = np.stack([f.obs.flatten() for f in holdout])
run = filter_session(obs, models, rng(1), n_members=32)

body = BodyModel.default()
errors = [pose_errors(run.means[t], holdout[t].gt, body) for t in range(len(holdout))]
report = session_report(errors)
print(f"\nheld-out wrist error: {report['wrist_cm']['mean']:.1f} cm mean, "
      f"{report['wrist_cm']['p90']:.1f} cm p90")
print(f"body-heading error: {report['hip_deg']['mean']:.1f} deg mean")

# The ensemble spread is the filter's own uncertainty signal; it should
# tighten once the window is warm.
warm = run.warm
print(f"mean state spread, warm frames: {run.spreads[warm].mean():.4f}")
