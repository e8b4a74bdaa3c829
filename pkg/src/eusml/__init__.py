"""EUS station-recognition toolkit.

Turns endoscopic-ultrasound procedure recordings plus live-captured station
timestamps into cleaned, enhanced, leakage-free labeled datasets; evaluates
station classifiers; explains predictions with Grad-CAM; and runs the live
labeling service clinicians use during procedures.
"""

__version__ = "0.1.0"
