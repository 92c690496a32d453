"""wearid: gesture-conditioned physiological re-identification on wearable data.

Pipeline stages: sensor ingestion and synthesis (`ingest`), physiological
signal derivation (`physio`), gesture detection and classification
(`gesture`), recurrence-plot image encoding (`rpencode`), the multi-modal
Siamese model (`mmsnn`), and the experiment harness (`attack_eval`).
`cli` ties the stages together behind subcommands.
"""

__version__ = "0.1.0"
