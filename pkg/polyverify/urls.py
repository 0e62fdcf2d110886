"""
URL configuration for the polyverify project.
"""
from django.contrib import admin
from django.urls import path, include
from drf_spectacular.views import SpectacularAPIView, SpectacularSwaggerView

urlpatterns = [
    # Admin
    path('admin/', admin.site.urls),

    # API Documentation
    path('api/v1/schema/', SpectacularAPIView.as_view(), name='schema'),
    path('api/v1/docs/', SpectacularSwaggerView.as_view(url_name='schema'), name='swagger-ui'),

    # Run ledger
    path('api/v1/runs/', include('benchmarks.urls')),
]

admin.site.site_header = "polyverify Admin"
admin.site.site_title = "polyverify Admin Portal"
admin.site.index_title = "Verification runs"
