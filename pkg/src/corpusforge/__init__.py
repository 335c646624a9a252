"""Speech corpus curation toolkit.

Builds identity-specific anti-spoofing datasets: audio ingestion, speaker
filtering, transcript-driven segmentation, quality gating, synthesis-job
orchestration for external TTS engines, and a listening-test service.
"""

__version__ = "0.1.0"
