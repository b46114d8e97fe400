from .manager import ProgressManager, manager

__all__ = ['ProgressManager', 'manager']
