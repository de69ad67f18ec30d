"""
AVSCOPE - Séparation audio-visuelle des sons à l'écran (échelle bureau)
Pipeline : séparation MixIT -> encodeurs d'attention audio-vidéo -> classifieur
à l'écran -> calibration isotonique -> métriques.
"""

__version__ = "1.0.0"
