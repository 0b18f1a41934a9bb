"""
URL configuration for the puflab project.

The lab has no pages of its own; the admin lists recorded experiment runs.
"""
from django.contrib import admin
from django.urls import path

urlpatterns = [
    path('admin/', admin.site.urls),
]
